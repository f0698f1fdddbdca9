//! Run configuration: a strict sectioned key-value document (TOML subset:
//! bracketed section headers, one `key = value` per line, `#` comments).
//! Unknown keys are fatal, every module constraint is re-validated at parse
//! time, and violations name the offending `section.key`.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::decomp::LatticeSpec;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::init::InitialKind;
use crate::kernel::DiffusionParams;
use crate::reaction::Reaction;
use crate::splitting::{commensurate_steps, SplitScheme, SplitVariant};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    domain: RawDomain,
    model: RawModel,
    reaction: RawReaction,
    scheme: RawScheme,
    initial: RawInitial,
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    length: f64,
    points: usize,
    period: f64,
    cells: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    sigma: f64,
    beta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReaction {
    kind: String,
    params: Vec<f64>,
    inner_kind: Option<String>,
    inner_params: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    variant: String,
    dt: f64,
    t_end: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    kind: String,
    params: Vec<f64>,
    seed: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: String,
    stride: usize,
    format: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainConfig {
    pub length: f64,
    pub points: usize,
    pub period: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub stride: usize,
    pub format: OutputFormat,
}

/// Fully validated configuration; construction is only possible through
/// [`parse_config`], so holders can rely on every module constraint.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub model: DiffusionParams,
    pub reaction: Reaction,
    pub variant: SplitVariant,
    pub dt: f64,
    pub t_end: f64,
    pub initial: InitialKind,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Grid of the full box; component count comes from the reaction.
    pub fn box_grid(&self) -> Result<GridSpec> {
        GridSpec::new(
            self.domain.points,
            self.domain.length,
            self.reaction.components(),
        )
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(
            self.domain.period,
            self.domain.cells,
            self.domain.points / self.domain.cells,
        )
    }

    pub fn scheme(&self) -> Result<SplitScheme> {
        SplitScheme::new(self.variant, self.dt)
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn expect_params(section: &str, kind: &str, params: &[f64], want: usize) -> Result<()> {
    if params.len() != want {
        return config_err(format!(
            "{section}.params for kind '{kind}' needs exactly {want} entries, got {}",
            params.len()
        ));
    }
    Ok(())
}

fn reaction_from_kind(kind: &str, params: &[f64], section: &str) -> Result<Reaction> {
    let reaction = match kind {
        "quadratic" => {
            expect_params(section, kind, params, 0)?;
            Reaction::Quadratic
        }
        "logistic" => {
            expect_params(section, kind, params, 2)?;
            Reaction::Logistic {
                rate: params[0],
                capacity: params[1],
            }
        }
        "fitzhugh_nagumo" => {
            expect_params(section, kind, params, 4)?;
            Reaction::FitzhughNagumo {
                i_ext: params[0],
                epsilon: params[1],
                a: params[2],
                b: params[3],
            }
        }
        "polynomial" => Reaction::Polynomial {
            coeffs: params.to_vec(),
        },
        other => {
            return config_err(format!(
                "{section}.kind '{other}' is not one of quadratic|logistic|fitzhugh_nagumo|polynomial|modulated"
            ))
        }
    };
    reaction
        .validate()
        .map_err(|e| Error::Config(format!("{section}: {e}")))?;
    Ok(reaction)
}

fn build_reaction(raw: &RawReaction) -> Result<Reaction> {
    if raw.kind == "modulated" {
        expect_params("reaction", "modulated", &raw.params, 2)?;
        let inner_kind = raw
            .inner_kind
            .as_deref()
            .ok_or_else(|| Error::Config("reaction.inner_kind is required for modulated".into()))?;
        let inner_params = raw.inner_params.clone().unwrap_or_default();
        let inner = reaction_from_kind(inner_kind, &inner_params, "reaction.inner")?;
        let reaction = Reaction::Modulated {
            depth: raw.params[0],
            frequency: raw.params[1],
            inner: Box::new(inner),
        };
        reaction
            .validate()
            .map_err(|e| Error::Config(format!("reaction: {e}")))?;
        return Ok(reaction);
    }
    if raw.inner_kind.is_some() || raw.inner_params.is_some() {
        return config_err("reaction.inner_kind/inner_params are only valid for kind 'modulated'");
    }
    reaction_from_kind(&raw.kind, &raw.params, "reaction")
}

fn build_initial_kind(raw: &RawInitial) -> Result<InitialKind> {
    let p = &raw.params;
    let kind = match raw.kind.as_str() {
        "constant" => {
            expect_params("initial", "constant", p, 1)?;
            InitialKind::Constant { value: p[0] }
        }
        "cosine" => {
            expect_params("initial", "cosine", p, 2)?;
            if p[1] < 1.0 || p[1].fract() != 0.0 {
                return config_err(format!(
                    "initial.params[1] (cycles) must be a positive integer, got {}",
                    p[1]
                ));
            }
            InitialKind::Cosine {
                amplitude: p[0],
                cycles: p[1] as u32,
            }
        }
        "gaussian_bump" => {
            expect_params("initial", "gaussian_bump", p, 3)?;
            InitialKind::GaussianBump {
                amplitude: p[0],
                width: p[1],
                center: p[2],
            }
        }
        "raised_cosine_bump" => {
            expect_params("initial", "raised_cosine_bump", p, 3)?;
            InitialKind::RaisedCosineBump {
                amplitude: p[0],
                width: p[1],
                center: p[2],
            }
        }
        "peregrine_sum" => {
            expect_params("initial", "peregrine_sum", p, 3)?;
            InitialKind::PeregrineSum {
                cos_amplitude: p[0],
                bump_amplitude: p[1],
                bump_width: p[2],
            }
        }
        "random_bounded" => {
            expect_params("initial", "random_bounded", p, 1)?;
            let seed = raw.seed.ok_or_else(|| {
                Error::Config("initial.seed is mandatory for random_bounded".into())
            })?;
            InitialKind::RandomBounded {
                sup: p[0],
                seed: seed as u64,
            }
        }
        other => {
            return config_err(format!(
                "initial.kind '{other}' is not one of constant|cosine|gaussian_bump|raised_cosine_bump|peregrine_sum|random_bounded"
            ))
        }
    };
    if !matches!(kind, InitialKind::RandomBounded { .. }) && raw.seed.is_some() {
        return config_err("initial.seed is only used by random_bounded");
    }
    Ok(kind)
}

/// Parses and fully validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;

    // domain
    let d = &raw.domain;
    if !(d.length.is_finite() && d.length > 0.0) {
        return config_err(format!("domain.length must be > 0, got {}", d.length));
    }
    if d.cells < 4 {
        return config_err(format!("domain.cells must be >= 4, got {}", d.cells));
    }
    if !(d.period.is_finite() && d.period > 0.0) {
        return config_err(format!("domain.period must be > 0, got {}", d.period));
    }
    if d.points % d.cells != 0 {
        return config_err(format!(
            "domain.points ({}) must be divisible by domain.cells ({})",
            d.points, d.cells
        ));
    }
    let cell_points = d.points / d.cells;
    if cell_points < 8 || cell_points % 2 != 0 {
        return config_err(format!(
            "domain.points/domain.cells must be even >= 8, got {cell_points}"
        ));
    }
    if (d.length - d.period * d.cells as f64).abs() > 1e-9 * d.length {
        return config_err(format!(
            "domain.length ({}) must equal domain.period * domain.cells ({})",
            d.length,
            d.period * d.cells as f64
        ));
    }
    GridSpec::new(d.points, d.length, 1).map_err(|e| Error::Config(format!("domain: {e}")))?;

    // model
    if !(raw.model.beta.is_finite() && raw.model.beta > 0.0 && raw.model.beta <= 1.0) {
        return config_err(format!(
            "model.beta must lie in (0,1], got {}",
            raw.model.beta
        ));
    }
    if !(raw.model.sigma.is_finite() && raw.model.sigma >= 0.0) {
        return config_err(format!("model.sigma must be >= 0, got {}", raw.model.sigma));
    }
    let model = DiffusionParams::new(raw.model.sigma, raw.model.beta)
        .map_err(|e| Error::Config(format!("model: {e}")))?;

    let reaction = build_reaction(&raw.reaction)?;

    // scheme
    let variant = match raw.scheme.variant.as_str() {
        "lie_paper" => SplitVariant::LiePaper,
        "lie_full" => SplitVariant::LieFull,
        "strang" => SplitVariant::Strang,
        other => {
            return config_err(format!(
                "scheme.variant '{other}' is not one of lie_paper|lie_full|strang"
            ))
        }
    };
    if !(raw.scheme.dt.is_finite() && raw.scheme.dt > 0.0) {
        return config_err(format!("scheme.dt must be > 0, got {}", raw.scheme.dt));
    }
    if !(raw.scheme.t_end.is_finite() && raw.scheme.t_end > 0.0) {
        return config_err(format!(
            "scheme.t_end must be > 0, got {}",
            raw.scheme.t_end
        ));
    }
    commensurate_steps(raw.scheme.t_end, raw.scheme.dt)
        .map_err(|e| Error::Config(format!("scheme.dt vs scheme.t_end: {e}")))?;

    // initial
    let initial = build_initial_kind(&raw.initial)?;
    let grid = GridSpec::new(d.points, d.length, reaction.components())
        .map_err(|e| Error::Config(format!("domain: {e}")))?;
    initial.validate(&grid)?;

    // output
    if raw.output.stride == 0 {
        return config_err("output.stride must be >= 1");
    }
    let format = match raw.output.format.as_str() {
        "csv" => OutputFormat::Csv,
        "bin" => OutputFormat::Bin,
        other => return config_err(format!("output.format '{other}' is not csv|bin")),
    };
    if raw.output.dir.is_empty() {
        return config_err("output.dir must not be empty");
    }

    Ok(RunConfig {
        domain: DomainConfig {
            length: d.length,
            points: d.points,
            period: d.period,
            cells: d.cells,
        },
        model,
        reaction,
        variant,
        dt: raw.scheme.dt,
        t_end: raw.scheme.t_end,
        initial,
        output: OutputConfig {
            dir: PathBuf::from(&raw.output.dir),
            stride: raw.output.stride,
            format,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal_config() -> String {
        "\
[domain]
length = 32.0
points = 1024
period = 2.0
cells = 16

[model]
sigma = 1.0
beta = 0.5

[reaction]
kind = \"quadratic\"
params = []

[scheme]
variant = \"strang\"
dt = 1e-3
t_end = 0.5

[initial]
kind = \"peregrine_sum\"
params = [0.1, 0.1, 1.0]

[output]
dir = \"out\"
stride = 50
format = \"bin\"
"
        .to_string()
    }

    #[test]
    fn minimal_document_round_trips_values() {
        let cfg = parse_config(&minimal_config()).unwrap();
        assert_eq!(cfg.domain.points, 1024);
        assert_eq!(cfg.domain.cells, 16);
        assert_eq!(cfg.model.sigma(), 1.0);
        assert_eq!(cfg.model.beta(), 0.5);
        assert_eq!(cfg.reaction, Reaction::Quadratic);
        assert_eq!(cfg.variant, SplitVariant::Strang);
        assert_eq!(cfg.output.format, OutputFormat::Bin);
        assert_eq!(cfg.output.stride, 50);
        let lattice = cfg.lattice().unwrap();
        assert_eq!(lattice.cell_points(), 64);
    }

    #[test]
    fn beta_out_of_range_names_the_key() {
        let text = minimal_config().replace("beta = 0.5", "beta = 1.5");
        let err = parse_config(&text).unwrap_err();
        assert!(err.is_config());
        assert!(
            err.to_string().contains("model.beta must lie in (0,1]"),
            "got: {err}"
        );
    }

    #[test]
    fn unknown_key_is_fatal_and_named() {
        let text = minimal_config().replace("sigma = 1.0", "sigma = 1.0\ngamma = 2.0");
        let err = parse_config(&text).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("gamma"), "got: {err}");
    }

    #[test]
    fn missing_key_is_fatal() {
        let text = minimal_config().replace("sigma = 1.0\n", "");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("sigma"), "got: {err}");
    }

    #[test]
    fn comments_are_allowed() {
        let text = format!("# leading comment\n{}", minimal_config());
        assert!(parse_config(&text).is_ok());
    }

    #[test]
    fn random_bounded_requires_seed() {
        let text = minimal_config().replace(
            "kind = \"peregrine_sum\"\nparams = [0.1, 0.1, 1.0]",
            "kind = \"random_bounded\"\nparams = [1.0]",
        );
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("seed"), "got: {err}");
        let with_seed = text.replace("params = [1.0]", "params = [1.0]\nseed = 42");
        assert!(parse_config(&with_seed).is_ok());
    }

    #[test]
    fn seed_rejected_for_deterministic_presets() {
        let text = minimal_config().replace(
            "params = [0.1, 0.1, 1.0]",
            "params = [0.1, 0.1, 1.0]\nseed = 7",
        );
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("seed"), "got: {err}");
    }

    #[test]
    fn incommensurate_dt_rejected_at_parse() {
        // t_end/dt = 1.67, more than 1% from an integer
        let text = minimal_config().replace("dt = 1e-3", "dt = 0.3");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("scheme.dt"), "got: {err}");
    }

    #[test]
    fn modulated_reaction_parses_with_inner() {
        let text = minimal_config().replace(
            "kind = \"quadratic\"\nparams = []",
            "kind = \"modulated\"\nparams = [0.5, 2.0]\ninner_kind = \"quadratic\"\ninner_params = []",
        );
        let cfg = parse_config(&text).unwrap();
        assert!(matches!(cfg.reaction, Reaction::Modulated { .. }));
    }

    #[test]
    fn domain_consistency_enforced() {
        let text = minimal_config().replace("period = 2.0", "period = 3.0");
        assert!(parse_config(&text).is_err());
        let text = minimal_config().replace("points = 1024", "points = 1000");
        assert!(parse_config(&text).is_err());
    }
}
