//! Time-varying TDL MIMO channels, per-RB SINR and the stale-CSI view.

pub mod fading;
pub mod io;
pub mod profile;
pub mod sinr;

pub use fading::{generate_fading, ChannelSlotSeries, FadingChannel, FadingConfig, SlotStream};
pub use profile::{load_tdl_profile, Tap, TapProfile, TdlModel};
pub use sinr::{per_rb_sinr, slot_sinr_grid, SinrGrid};

/// Slot whose channel is known at slot `q` when CSI is refreshed every
/// `t_csi` slots: `⌊q / t_csi⌋ · t_csi`.
pub fn stale_channel_slot(q: u64, t_csi: u64) -> u64 {
    assert!(t_csi >= 1, "reporting period must be at least one slot");
    q / t_csi * t_csi
}
