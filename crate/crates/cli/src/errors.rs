//! Maps library errors onto the two failure exit codes: inputs the user can
//! fix are validation errors, everything raised mid-computation is numerical.

use std::fmt;

use kdvbed::bottom::BottomError;
use kdvbed::charflow::FlowError;
use kdvbed::coeffs::CoeffError;
use kdvbed::consistency::ConsistencyError;
use kdvbed::ensemble::EnsembleError;
use kdvbed::io::IoError;
use kdvbed::scalesep::ScaleError;
use kdvbed::spectral::SpectralError;
use kdvbed::waves::WaveError;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

fn classify(user_fixable: bool, e: impl fmt::Display) -> CliError {
    if user_fixable {
        CliError::Validation(e.to_string())
    } else {
        CliError::Numerical(e.to_string())
    }
}

fn spectral_fixable(e: &SpectralError) -> bool {
    matches!(e, SpectralError::BadSize(_) | SpectralError::BadLength(_))
}

fn bottom_fixable(e: &BottomError) -> bool {
    match e {
        BottomError::Spectral(s) => spectral_fixable(s),
        _ => true,
    }
}

fn coeff_fixable(e: &CoeffError) -> bool {
    match e {
        CoeffError::Params(_) | CoeffError::AmplitudeGuard { .. } | CoeffError::Coverage { .. } => true,
        CoeffError::Spectral(s) => spectral_fixable(s),
        _ => false,
    }
}

fn flow_fixable(e: &FlowError) -> bool {
    match e {
        FlowError::StepTooLarge { .. } | FlowError::MissingTime(_) => true,
        FlowError::Bottom(b) => bottom_fixable(b),
        FlowError::Coeff(c) => coeff_fixable(c),
        _ => false,
    }
}

fn wave_fixable(e: &WaveError) -> bool {
    match e {
        WaveError::BadTimes | WaveError::Underresolved { .. } | WaveError::Cutoff { .. } | WaveError::Cfl(_) => true,
        WaveError::Spectral(s) => spectral_fixable(s),
        WaveError::Flow(f) => flow_fixable(f),
        _ => false,
    }
}

impl From<BottomError> for CliError {
    fn from(e: BottomError) -> Self {
        classify(bottom_fixable(&e), e)
    }
}

impl From<CoeffError> for CliError {
    fn from(e: CoeffError) -> Self {
        classify(coeff_fixable(&e), e)
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        classify(spectral_fixable(&e), e)
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        classify(flow_fixable(&e), e)
    }
}

impl From<WaveError> for CliError {
    fn from(e: WaveError) -> Self {
        classify(wave_fixable(&e), e)
    }
}

impl From<ScaleError> for CliError {
    fn from(e: ScaleError) -> Self {
        let fixable = match &e {
            ScaleError::Bottom(b) => bottom_fixable(b),
            ScaleError::EpsList(_) | ScaleError::TooFew | ScaleError::Underresolved { .. } | ScaleError::Degenerate(_) => {
                true
            }
        };
        classify(fixable, e)
    }
}

impl From<ConsistencyError> for CliError {
    fn from(e: ConsistencyError) -> Self {
        let fixable = match &e {
            ConsistencyError::Bottom(b) => bottom_fixable(b),
            ConsistencyError::Coeff(c) => coeff_fixable(c),
            ConsistencyError::Flow(f) => flow_fixable(f),
            ConsistencyError::Wave(w) => wave_fixable(w),
            ConsistencyError::Support { .. } | ConsistencyError::TooFew(_) => true,
            ConsistencyError::Degenerate => false,
        };
        classify(fixable, e)
    }
}

impl From<EnsembleError> for CliError {
    fn from(e: EnsembleError) -> Self {
        let fixable = match &e {
            EnsembleError::Bottom(b) => bottom_fixable(b),
            EnsembleError::Coeff(c) => coeff_fixable(c),
            EnsembleError::Flow(f) => flow_fixable(f),
            EnsembleError::Invalid(_) | EnsembleError::Growth(_) => true,
            EnsembleError::Range(_) | EnsembleError::AllFailed(_) => false,
        };
        classify(fixable, e)
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Validation(e.to_string())
    }
}
