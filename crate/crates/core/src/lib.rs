//! Thermodynamic formalism on subshifts of finite type, computed exactly.
//!
//! A potential that depends on the first `m` symbols makes the Ruelle
//! transfer operator a finite sparse matrix on functions of `m` symbols.
//! Everything else is built on that matrix:
//!
//! * [`shift`]: the subshift, admissible words, the `d_θ` metric;
//! * [`potential`]: locally constant potentials, Birkhoff sums, Hölder norms;
//! * [`operator`]: operator matrices, Perron eigendata, normalization, Gibbs chains;
//! * [`pressure`]: shift and flow pressure, the pressure curve, rate functions;
//! * [`ldp`]: shrinking-window large deviations by enumeration and by Fourier inversion;
//! * [`scan`]: decay of iterates of the two-parameter complex operator family.
//!
//! ```
//! use ruelle::{pressure_sigma, Potential, Subshift};
//!
//! let golden = Subshift::golden_mean();
//! let p = pressure_sigma(&Potential::<f64>::zero(&golden))?;
//! assert!((p - ((1.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-12);
//! # Ok::<(), ruelle::Error>(())
//! ```

pub mod error;
pub mod ldp;
pub mod numerics;
pub mod operator;
pub mod potential;
pub mod pressure;
pub mod scan;
pub mod shift;

pub use error::{Error, Result};
pub use ldp::{
    asymptote, build_ldp_table, delta_constraint_check, rho_exact, rho_smooth_direct, rho_smooth_spectral,
    AsymptoteMode, CutoffFunction, CutoffKind, LdpConfig, LdpTable, QuadratureSpec,
};
pub use operator::{
    apply_iterated, build_operator, conjugation_identity_check, gibbs_cylinder_mass, leading_eigendata,
    normalize_potential, EigenOptions, GibbsMeasure, NormalizedOperator, SpectralData, TransferOperator,
};
pub use potential::{
    birkhoff_sum, combine, combine_real, depth_truncate, holder_seminorm, norm_beta_b, NormBundle, Potential,
    PotentialKind, Scalar, WordFunction,
};
pub use pressure::{
    a_for_rate, lattice_check, pressure_flow, pressure_sigma, rate_J, rate_value, LatticeOptions, LatticeReport,
    PressureCurve, PressureSettings, RateReport, Side,
};
pub use scan::{decay_sequence, envelope_report, two_parameter_sweep, DecayFit, EnvelopeReport, ScanConfig, SeedKind};
pub use shift::{d_theta, validate_subshift, Subshift, Symbol, ThetaMetric, Word, WordTable};
