//! Extended-precision evaluation and numerical certification of finite and
//! infinite trigonometric products whose limits are `sinc z = sin(z)/z`:
//! Morrie's law and its telescoping generalization, Viète's cosine product,
//! ratio, cosine-sum, gamma-ratio and exponent-tower products.
//!
//! * [`numerics`]: complex trig, log-sin, log-gamma and sinc at a chosen precision.
//! * [`product`]: term generators, log-space partial products, closed-form oracles.
//! * [`gamma_product`]: the gamma-ratio product and its factor-by-factor comparison.
//! * [`convergence`]: remainder models, truncation control and rate fitting.
//! * [`verification`]: grid sweeps, cross-family checks and the nested-radical table.

pub mod convergence;
pub mod error;
pub mod gamma_product;
pub mod numerics;
pub mod product;
pub mod serde_complex;
pub mod verification;

pub use error::{Error, PoleHit, PoleKind, Result};
pub use numerics::{ComplexValue, Precision, TrigFn};
pub use product::{EvalResult, FactorForm, Flag, Flags, FormulaId, ProductRequest, TermValue};
