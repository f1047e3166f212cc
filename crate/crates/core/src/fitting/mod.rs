//! Least-squares engine and the resonator fitters built on it.

pub mod circle;
pub mod exponential;
pub mod lorentzian;
pub mod mb;
pub mod nlls;

pub use circle::{algebraic_circle, circle_fit, CircleFitResult, NotchResonator};
pub use exponential::{exp_fit, ExpDecayParams};
pub use lorentzian::{lorentzian_fit, lorentzian_initial_guess, LorentzianParams, WidthConvention};
pub use mb::{mb_fit, MbFitMode, MbFitOptions, MbFitResult, MbWarning, MbWeighting};
pub use nlls::{curve_fit, nlls, numerical_jacobian, Bounds, CurveData, FitResult, LeastSquaresProblem, NllsOptions};
