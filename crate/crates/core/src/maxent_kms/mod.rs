//! Maximum-entropy thermal states and the KMS condition.

mod kms;
mod maxent;

pub use kms::{
    correlator_csv, kms_correlators, strip_residual_csv, strip_rows, uniform_lattice, verify_kms,
    KmsCorrelators, KmsReport,
};
pub use maxent::{
    build_kms_state, canonical_density, constrained_competitors, label_weight_matrix,
    log_partition, mean_energy, shannon_entropy, solve_multiplier, solve_thermal_params,
    thermal_functional, MultiplierSolution, ThermalParams, ThermalTargets,
};
