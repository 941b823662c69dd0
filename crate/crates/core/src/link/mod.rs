//! EESM compression, CQI selection and the parametric BLER model.

pub mod cqi;
pub mod eesm;

pub use cqi::{spectral_efficiency, CqiEntry, CqiTable, NUM_CQI};
pub use eesm::{
    bler, db_to_lin, eesm, eesm_values, lin_to_db, select_cqi, select_cqi_for_value, EffectiveSinr,
};
