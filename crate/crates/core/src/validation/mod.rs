//! Model-fit P-values, parameter cross-validation with coverage tests, and
//! model-choice validation.

pub mod cross;
pub mod fit;
pub mod models;

pub use cross::{CoverageTest, ValidationMode, ValidationRow, ValidationRun, coverage_tests, cross_validate};
pub use fit::{DepthIndex, FitPValues, fit_pvalues, marginal_density_pvalue, tukey_depth, tukey_pvalue};
pub use models::{
    CalibrationBin, ConfusionMatrix, ModelChoiceValidation, calibration_curve, calibration_table,
    model_choice_validate,
};
