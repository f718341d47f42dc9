//! Nonlinear least squares and the peak models built on it.

mod lm;
mod peaks;

pub use lm::{nlls_solve, FitResult, FnProblem, LeastSquaresProblem, LmOptions};
pub use peaks::{
    default_threshold, detect_peaks, extract_resonances, fit_peaks, fit_peaks_with_limit, moving_average, Candidate, Detection,
    InitialGuess, Peak, PeakFit, PeakModel, Resonance, SAMPLES_PER_PARAMETER,
};
