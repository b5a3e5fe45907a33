//! File formats and persistence for the command line: sample files, draw
//! archives and error reporting.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bayes_engine::{PosteriorDraws, SamplerConfig};
use crate::df_selection::DfSelection;
use crate::error::{Error, Result};
use crate::induced_density::{ModelSpec, TwoSampleData};
use crate::pipeline::{FittedModel, ModelChoice};

pub const ARCHIVE_FORMAT_VERSION: u32 = 1;

/// Parses a headerless single-column sample: one positive finite value per
/// line. Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_sample(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let field = raw.trim().trim_end_matches(',').trim();
        if field.is_empty() {
            continue;
        }
        if field.contains(',') {
            return Err(Error::Parse {
                line,
                message: format!("expected one value, found '{field}'"),
            });
        }
        let v: f64 = field.parse().map_err(|_| Error::Parse {
            line,
            message: format!("'{field}' is not a number"),
        })?;
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("value {field} is not a positive finite number"),
            });
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::input("sample file contains no values"));
    }
    Ok(values)
}

pub fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    parse_sample(&text).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::Input(m) => Error::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Reads both samples and applies the optional power transform y ↦ yᵉ.
pub fn load_data(cases: &Path, controls: &Path, power: Option<f64>) -> Result<TwoSampleData> {
    let data = TwoSampleData::new(read_sample(cases)?, read_sample(controls)?)?;
    match power {
        Some(e) => data.powered(e),
        None => Ok(data),
    }
}

/// Everything needed to evaluate functionals later without re-sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawArchive {
    pub format_version: u32,
    pub model: ModelChoice,
    /// Starting model, including the resolved basis.
    pub spec: ModelSpec,
    pub sampler: SamplerConfig,
    pub seed: u64,
    pub power_transform: Option<f64>,
    /// The (transformed) data the chain was run on.
    pub data: TwoSampleData,
    pub beta_hat: Vec<f64>,
    pub df_selection: Option<DfSelection>,
    pub draws: PosteriorDraws,
}

impl DrawArchive {
    pub fn new(
        model: ModelChoice,
        fit: FittedModel,
        data: TwoSampleData,
        power_transform: Option<f64>,
    ) -> Self {
        Self {
            format_version: ARCHIVE_FORMAT_VERSION,
            model,
            spec: fit.spec,
            sampler: fit.draws.config.clone(),
            seed: fit.draws.config.seed,
            power_transform,
            data,
            beta_hat: fit.ols.beta_hat,
            df_selection: fit.selection,
            draws: fit.draws,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let archive: Self = serde_json::from_str(text)?;
        if archive.format_version != ARCHIVE_FORMAT_VERSION {
            return Err(Error::input(format!(
                "unsupported archive format version {} (expected {ARCHIVE_FORMAT_VERSION})",
                archive.format_version
            )));
        }
        Ok(archive)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Short machine-readable category of an error.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Singularity(_) => "singularity",
        Error::Numeric(_) => "numeric",
        Error::Convergence { .. } => "convergence",
        Error::Input(_) => "input",
        Error::LinearAlgebra(_) => "linear-algebra",
        Error::Infeasible(_) => "infeasible",
        Error::Parse { .. } => "parse",
        Error::Selection(_) => "selection",
        Error::Io(_) => "io",
        Error::Archive(_) => "archive",
    }
}

/// 2 for usage and parse problems, 3 for an infeasible model, 4 for
/// numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) | Error::Parse { .. } | Error::Io(_) | Error::Archive(_) => 2,
        Error::Infeasible(_) | Error::Selection(_) => 3,
        Error::Domain(_)
        | Error::Singularity(_)
        | Error::Numeric(_)
        | Error::Convergence { .. }
        | Error::LinearAlgebra(_) => 4,
    }
}

/// One line: `error[kind]: message`.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\n', " ");
    format!("error[{}]: {msg}", error_kind(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes_engine::SamplerConfig;
    use crate::density_families::{CaseDensity, FamilyKind};
    use crate::pipeline::{fit_model, DfChoice};
    use crate::quantile_core::{BasisFamily, LinkFunction};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_and_reports_lines() {
        assert_eq!(parse_sample("1.5\n\n2\n3e2,\n").unwrap(), vec![1.5, 2.0, 300.0]);
        match parse_sample("1\n2\n-3\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
        match parse_sample("1\nabc\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
        assert!(matches!(parse_sample("0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_sample("1,2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_sample("inf\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_sample("\n \n").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Parse { line: 1, message: "x".into() }), 2);
        assert_eq!(exit_code(&Error::Infeasible("x".into())), 3);
        assert_eq!(exit_code(&Error::Convergence { index: 1, value: 2.0 }), 4);
        assert_eq!(
            error_line(&Error::Parse { line: 4, message: "bad".into() }),
            "error[parse]: line 4: bad"
        );
    }

    #[test]
    fn archive_round_trip_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y1 = CaseDensity::log_normal(1.0, 0.8).unwrap().sample_n(60, &mut rng);
        let y2 = CaseDensity::log_normal(0.7, 0.6).unwrap().sample_n(80, &mut rng);
        let data = TwoSampleData::new(y1, y2).unwrap();
        let model = ModelChoice::new(
            FamilyKind::LogNormal,
            LinkFunction::Log,
            BasisFamily::NaturalCubicSpline,
            DfChoice::Auto { max: 3 },
        );
        let config = SamplerConfig {
            iterations: 60,
            burn_in: 20,
            seed: 3,
            ..Default::default()
        };
        let fit = fit_model(&data, &model, &config).unwrap();
        let archive = DrawArchive::new(model, fit, data, Some(1.0));
        let json = archive.to_json().unwrap();
        let back = DrawArchive::from_json(&json).unwrap();
        assert_eq!(back, archive);
        assert_eq!(back.to_json().unwrap(), json);
        let bumped = json.replacen("\"format_version\": 1", "\"format_version\": 99", 1);
        assert!(DrawArchive::from_json(&bumped).is_err());
    }
}
