//! The run configuration and its flat `key = value` text format.
//!
//! See `docs/config.md` for the grammar.

use std::str::FromStr;

use hjb_bdf2::analysis::{ErrorRange, NormKind};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    /// 1-based; 0 for errors that concern the document as a whole.
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Eikonal,
    EikonalNeg,
    ControlledDiffusion,
    Custom,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Eikonal => "eikonal",
            Scenario::EikonalNeg => "eikonal-neg",
            Scenario::ControlledDiffusion => "controlled-diffusion",
            Scenario::Custom => "custom",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "eikonal" => Scenario::Eikonal,
            "eikonal-neg" => Scenario::EikonalNeg,
            "controlled-diffusion" => Scenario::ControlledDiffusion,
            "custom" => Scenario::Custom,
            _ => return Err(format!("unknown scenario '{s}'")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeChoice {
    Bdf2,
    Euler,
    Cn,
    Bdf2CenteredDrift,
}

impl SchemeChoice {
    pub fn name(self) -> &'static str {
        match self {
            SchemeChoice::Bdf2 => "bdf2",
            SchemeChoice::Euler => "euler",
            SchemeChoice::Cn => "cn",
            SchemeChoice::Bdf2CenteredDrift => "bdf2-centered-drift",
        }
    }
}

impl FromStr for SchemeChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "bdf2" => SchemeChoice::Bdf2,
            "euler" => SchemeChoice::Euler,
            "cn" => SchemeChoice::Cn,
            "bdf2-centered-drift" => SchemeChoice::Bdf2CenteredDrift,
            _ => return Err(format!("unknown scheme '{s}'")),
        })
    }
}

/// `levels` rows starting at `n0` time steps and `cells0 = I + 1` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LadderSpec {
    pub n0: usize,
    pub cells0: usize,
    pub levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceSpec {
    Exact {
        range: ErrorRange,
    },
    /// Backward Euler on `n` steps and `cells` cells, compared at final time.
    EulerReference {
        n: usize,
        cells: usize,
    },
}

/// Constant-coefficient problem; every coefficient list has one entry per
/// control.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomSpec {
    pub controls: Vec<f64>,
    pub domain: (f64, f64),
    pub horizon: f64,
    pub sigma: Vec<f64>,
    pub drift: Vec<f64>,
    pub source: Vec<f64>,
    /// Constant initial datum.
    pub initial: f64,
}

impl Default for CustomSpec {
    fn default() -> Self {
        CustomSpec {
            controls: vec![0.0],
            domain: (0.0, 1.0),
            horizon: 1.0,
            sigma: vec![0.0],
            drift: vec![0.0],
            source: vec![0.0],
            initial: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub custom: Option<CustomSpec>,
    pub scheme: SchemeChoice,
    pub ladder: LadderSpec,
    /// `tau / h`, identical on every row.
    pub cfl: f64,
    pub norms: Vec<NormKind>,
    pub reference: ReferenceSpec,
    pub tol: f64,
    pub max_iter: usize,
    pub policy_predictor: bool,
    pub parallel: bool,
    pub dump_profiles: bool,
    pub dump_matrices: bool,
}

impl RunConfig {
    pub fn domain(&self) -> (f64, f64) {
        match self.scenario {
            Scenario::Eikonal | Scenario::EikonalNeg => (-2.0, 2.0),
            Scenario::ControlledDiffusion => (-1.0, 1.0),
            Scenario::Custom => self.custom.as_ref().map_or((0.0, 1.0), |c| c.domain),
        }
    }

    pub fn horizon(&self) -> f64 {
        match self.scenario {
            Scenario::Eikonal | Scenario::EikonalNeg => 0.2,
            Scenario::ControlledDiffusion => 0.5,
            Scenario::Custom => self.custom.as_ref().map_or(1.0, |c| c.horizon),
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| err(line, format!("cannot parse '{v}' as a value for '{key}'")))
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    v.split(',')
        .map(|p| parse_value(line, key, p.trim()))
        .collect()
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(err(
            line,
            format!("'{key}' expects true or false, got '{v}'"),
        )),
    }
}

fn positive(line: usize, key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(err(line, format!("'{key}' must be positive, got {v}")))
    }
}

/// Parses and validates a configuration, filling in defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut scenario = None;
    let mut scheme = SchemeChoice::Bdf2;
    let (mut n0, mut cells0, mut levels) = (None, None, None);
    let mut ladder_line = 0;
    let mut cfl: Option<(f64, usize)> = None;
    let mut norms = vec![NormKind::H1Rescaled, NormKind::L2Rescaled, NormKind::Sup];
    let mut reference_kind: Option<(String, usize)> = None;
    let (mut ref_n, mut ref_cells) = (None, None);
    let mut range = ErrorRange::FromSecondStep;
    let mut tol = 1e-10;
    let mut max_iter = 10_000;
    let mut policy_predictor = true;
    let mut parallel = true;
    let mut dump_profiles = false;
    let mut dump_matrices = false;
    let mut custom = CustomSpec::default();
    let mut custom_seen = false;
    let mut custom_line = 0;
    let mut seen = std::collections::HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected 'key = value', got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(err(line, format!("duplicate key '{key}'")));
        }
        match key {
            "scenario" => {
                scenario = Some(value.parse::<Scenario>().map_err(|m| err(line, m))?);
            }
            "scheme" => {
                if !value.is_empty() {
                    scheme = value.parse().map_err(|m| err(line, m))?;
                }
            }
            "ladder" => {
                let v: Vec<usize> = parse_list(line, key, value)?;
                let [a, b, c] = v[..] else {
                    return Err(err(line, "ladder expects 'N0, I0+1, levels'"));
                };
                (n0, cells0, levels) = (Some(a), Some(b), Some(c));
                ladder_line = line;
            }
            "ladder.n0" => {
                n0 = Some(parse_value(line, key, value)?);
                ladder_line = line;
            }
            "ladder.cells" => {
                cells0 = Some(parse_value(line, key, value)?);
                ladder_line = line;
            }
            "ladder.levels" => {
                levels = Some(parse_value(line, key, value)?);
                ladder_line = line;
            }
            "cfl" => cfl = Some((positive(line, key, parse_value(line, key, value)?)?, line)),
            "norms" => {
                norms = value
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<NormKind>()
                            .map_err(|e| err(line, e.to_string()))
                    })
                    .collect::<Result<_, _>>()?;
            }
            "reference" => reference_kind = Some((value.to_string(), line)),
            "reference.n" => ref_n = Some(parse_value(line, key, value)?),
            "reference.cells" => ref_cells = Some(parse_value(line, key, value)?),
            "errors.range" => {
                range = match value {
                    "from-second-step" => ErrorRange::FromSecondStep,
                    "all" => ErrorRange::AllLevels,
                    "final" => ErrorRange::FinalLevel,
                    _ => return Err(err(line, format!("unknown error range '{value}'"))),
                }
            }
            "solver.tol" => tol = positive(line, key, parse_value(line, key, value)?)?,
            "solver.max_iter" => max_iter = parse_value(line, key, value)?,
            "solver.policy_predictor" => policy_predictor = parse_bool(line, key, value)?,
            "parallel" => parallel = parse_bool(line, key, value)?,
            "dump.profiles" => dump_profiles = parse_bool(line, key, value)?,
            "dump.matrices" => dump_matrices = parse_bool(line, key, value)?,
            _ if key.starts_with("custom.") => {
                custom_seen = true;
                custom_line = custom_line.max(line);
                match &key["custom.".len()..] {
                    "controls" => custom.controls = parse_list(line, key, value)?,
                    "domain" => {
                        let v: Vec<f64> = parse_list(line, key, value)?;
                        let [a, b] = v[..] else {
                            return Err(err(line, "custom.domain expects 'x_min, x_max'"));
                        };
                        if !(a < b) {
                            return Err(err(line, "custom.domain needs x_min < x_max"));
                        }
                        custom.domain = (a, b);
                    }
                    "horizon" => {
                        custom.horizon = positive(line, key, parse_value(line, key, value)?)?
                    }
                    "sigma" => custom.sigma = parse_list(line, key, value)?,
                    "drift" => custom.drift = parse_list(line, key, value)?,
                    "source" => custom.source = parse_list(line, key, value)?,
                    "initial" => custom.initial = parse_value(line, key, value)?,
                    other => return Err(err(line, format!("unknown key 'custom.{other}'"))),
                }
            }
            _ => return Err(err(line, format!("unknown key '{key}'"))),
        }
    }

    let scenario = scenario.ok_or_else(|| err(0, "missing 'scenario'"))?;
    if custom_seen && scenario != Scenario::Custom {
        return Err(err(custom_line, "custom.* keys need 'scenario = custom'"));
    }
    let custom = if scenario == Scenario::Custom {
        let m = custom.controls.len();
        if m == 0 {
            return Err(err(custom_line, "custom.controls is empty"));
        }
        for (name, list) in [
            ("sigma", &mut custom.sigma),
            ("drift", &mut custom.drift),
            ("source", &mut custom.source),
        ] {
            // a single value applies to every control
            if list.len() == 1 {
                *list = vec![list[0]; m];
            }
            if list.len() != m {
                return Err(err(
                    custom_line,
                    format!("custom.{name} needs 1 or {m} values, got {}", list.len()),
                ));
            }
        }
        Some(custom)
    } else {
        None
    };

    let levels = levels.ok_or_else(|| err(0, "missing 'ladder' or 'ladder.levels'"))?;
    let cells0 = cells0.ok_or_else(|| err(0, "missing 'ladder' or 'ladder.cells'"))?;
    if levels < 1 {
        return Err(err(ladder_line, "ladder needs at least one level"));
    }
    if cells0 < 2 {
        return Err(err(
            ladder_line,
            "ladder needs at least 2 cells (one unknown)",
        ));
    }
    let mut cfg = RunConfig {
        scenario,
        custom,
        scheme,
        ladder: LadderSpec {
            n0: 0,
            cells0,
            levels,
        },
        cfl: 0.0,
        norms,
        reference: ReferenceSpec::Exact { range },
        tol,
        max_iter,
        policy_predictor,
        parallel,
        dump_profiles,
        dump_matrices,
    };
    let (x_min, x_max) = cfg.domain();
    let h0 = (x_max - x_min) / cells0 as f64;
    let horizon = cfg.horizon();
    match (n0, cfl) {
        (None, None) => return Err(err(0, "need 'cfl' or 'ladder.n0'")),
        (Some(0), _) => return Err(err(ladder_line, "ladder N0 must be at least 1")),
        (Some(n), None) => {
            cfg.ladder.n0 = n;
            cfg.cfl = horizon / n as f64 / h0;
        }
        (None, Some((c, line))) => {
            let n = horizon / (c * h0);
            if (n - n.round()).abs() > 1e-9 * n || n.round() < 1.0 {
                return Err(err(
                    line,
                    format!("cfl {c} does not give a whole number of steps (T/(cfl h) = {n})"),
                ));
            }
            cfg.ladder.n0 = n.round() as usize;
            cfg.cfl = c;
        }
        (Some(n), Some((c, line))) => {
            let implied = horizon / n as f64 / h0;
            if (implied - c).abs() > 1e-9 * c {
                return Err(err(
                    line,
                    format!("cfl {c} disagrees with the ladder, whose tau/h is {implied}"),
                ));
            }
            cfg.ladder.n0 = n;
            cfg.cfl = c;
        }
    }

    let has_exact = scenario != Scenario::ControlledDiffusion;
    let (kind, kind_line) = reference_kind.unwrap_or_else(|| {
        let k = if has_exact {
            "exact"
        } else {
            "euler-reference"
        };
        (k.to_string(), 0)
    });
    cfg.reference = match kind.as_str() {
        "exact" => {
            if !has_exact {
                return Err(err(
                    kind_line,
                    format!("scenario '{}' has no exact solution", scenario.name()),
                ));
            }
            if ref_n.is_some() || ref_cells.is_some() {
                return Err(err(
                    kind_line,
                    "reference.n/cells only apply to euler-reference",
                ));
            }
            ReferenceSpec::Exact { range }
        }
        "euler-reference" => {
            let finest = cells0 << (levels - 1);
            let cells = ref_cells.unwrap_or(2 * finest);
            let n = ref_n.unwrap_or(1 << 16);
            if cells % finest != 0 {
                return Err(err(
                    kind_line,
                    format!(
                        "reference.cells = {cells} is not a multiple of the finest row's {finest}"
                    ),
                ));
            }
            if n == 0 {
                return Err(err(kind_line, "reference.n must be at least 1"));
            }
            ReferenceSpec::EulerReference { n, cells }
        }
        other => return Err(err(kind_line, format!("unknown reference '{other}'"))),
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_config() {
        let c = parse_config("scenario = eikonal\nscheme = bdf2\nladder = 5, 10, 8\ncfl = 0.1\n")
            .unwrap();
        assert_eq!(
            c.ladder,
            LadderSpec {
                n0: 5,
                cells0: 10,
                levels: 8
            }
        );
        assert_eq!(c.tol, 1e-10);
        assert_eq!(
            c.norms,
            vec![NormKind::H1Rescaled, NormKind::L2Rescaled, NormKind::Sup]
        );
        assert_eq!(
            c.reference,
            ReferenceSpec::Exact {
                range: ErrorRange::FromSecondStep
            }
        );
        // finest row N = 640, I+1 = 1280
        assert_eq!(c.ladder.n0 << 7, 640);
        assert_eq!(c.ladder.cells0 << 7, 1280);
    }

    #[test]
    fn table_four_config() {
        let c = parse_config(
            "scenario = controlled-diffusion\nscheme = cn\nladder = 1, 20, 9\ncfl = 5\n",
        )
        .unwrap();
        assert_eq!(c.scheme, SchemeChoice::Cn);
        assert_eq!(
            c.reference,
            ReferenceSpec::EulerReference {
                n: 65536,
                cells: 10240
            }
        );
    }

    #[test]
    fn empty_scheme_defaults_to_bdf2() {
        let c = parse_config("scenario = eikonal\nscheme =\nladder = 5, 10, 2\n").unwrap();
        assert_eq!(c.scheme, SchemeChoice::Bdf2);
        assert!((c.cfl - 0.1).abs() < 1e-12);
    }

    #[test]
    fn dotted_ladder_with_derived_n0() {
        let c = parse_config(
            "scenario = eikonal # comment\nladder.cells = 10\nladder.levels = 3\ncfl = 0.1\n",
        )
        .unwrap();
        assert_eq!(c.ladder.n0, 5);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_config("scenario = eikonal\nscheme = rk4\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_config("scenario = heat\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_config("scenario = eikonal\n\nladder = 5, 10\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_config("scenario = eikonal\nladder = 5, 10, 8\ncfl = -1\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_config("scenario = eikonal\nladder = 5, 10, 8\ncfl = 0.3\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_config("scenario = eikonal\nladder = 5, 10, 0\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_config("scenario = eikonal\nfoo = 1\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_config("ladder = 5, 10, 8\n").unwrap_err();
        assert_eq!(e.line, 0);
        assert!(parse_config(
            "scenario = controlled-diffusion\nladder = 1,20,2\nreference = exact\n"
        )
        .is_err());
    }

    #[test]
    fn custom_lists_broadcast() {
        let c = parse_config(
            "scenario = custom\ncustom.controls = 1, -1\ncustom.source = 0\nladder = 2, 4, 3\n",
        )
        .unwrap();
        let s = c.custom.unwrap();
        assert_eq!(s.source, vec![0.0, 0.0]);
        assert_eq!(s.sigma, vec![0.0, 0.0]);
        assert!(parse_config("scenario = custom\ncustom.controls = 1, -1\ncustom.drift = 1, 2, 3\nladder = 2, 4, 3\n").is_err());
        assert!(parse_config("scenario = eikonal\ncustom.initial = 1\nladder = 5,10,2\n").is_err());
    }
}
