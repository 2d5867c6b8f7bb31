//! Flat key=value run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use idmrg_core::engine::{LanczosModeConfig, PredictorChoice, RunConfig};

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Everything a run needs: the engine parameters plus driver-level fields.
#[derive(Clone, Debug)]
pub struct CliConfig {
    pub run: RunConfig<f64>,
    pub output_path: PathBuf,
    /// Second leg of `compare-fidelity`.
    pub compare_predictor: PredictorChoice,
}

impl CliConfig {
    /// Path of the summary file written next to the CSV.
    pub fn summary_path(&self) -> PathBuf {
        self.output_path.with_extension("summary")
    }

    /// Key=value echo of every field, for the summary file.
    pub fn echo(&self) -> Vec<(String, String)> {
        let r = &self.run;
        vec![
            ("config_j".into(), format_float(r.j)),
            ("config_delta".into(), format_float(r.delta)),
            ("config_m_max".into(), r.m_max.to_string()),
            ("config_two_n_max".into(), r.two_n_max.to_string()),
            ("config_predictor".into(), predictor_name(r.predictor).into()),
            ("config_lanczos_tol".into(), format_float(r.lanczos_tol)),
            (
                "config_lanczos_max_iter".into(),
                r.lanczos_max_iter.to_string(),
            ),
            (
                "config_lanczos_mode".into(),
                match r.lanczos_mode {
                    LanczosModeConfig::Converge => "converge".into(),
                    LanczosModeConfig::SingleStep => "single_step".into(),
                },
            ),
            ("config_pinv_eps".into(), format_float(r.pinv_eps)),
            (
                "config_degeneracy_tol".into(),
                format_float(r.degeneracy_tol),
            ),
            ("config_seed".into(), r.seed.to_string()),
            (
                "config_sz_sector_restriction".into(),
                if r.sz_sector_restriction { "1" } else { "0" }.into(),
            ),
            (
                "config_compare_predictor".into(),
                predictor_name(self.compare_predictor).into(),
            ),
            (
                "config_output_path".into(),
                self.output_path.display().to_string(),
            ),
        ]
    }
}

pub fn predictor_name(p: PredictorChoice) -> &'static str {
    match p {
        PredictorChoice::None => "none",
        PredictorChoice::Pwfrg => "pwfrg",
        PredictorChoice::Mcculloch => "mcculloch",
    }
}

/// Serializes with 17 significant digits so re-parsing is exact.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses the config file text plus `--set key=value` overrides (overrides
/// win). Unknown keys, malformed values, and violated invariants are all
/// reported with the offending field name.
pub fn parse_config(file_text: &str, overrides: &[String]) -> Result<CliConfig, ConfigError> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, line) in file_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(&format!("line {}", lineno + 1), "expected key=value"))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| err("--set", format!("`{item}` is not key=value")))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }

    let known = [
        "j",
        "delta",
        "m_max",
        "two_n_max",
        "predictor",
        "lanczos_tol",
        "lanczos_max_iter",
        "lanczos_mode",
        "pinv_eps",
        "degeneracy_tol",
        "seed",
        "sz_sector_restriction",
        "output_path",
        "compare_predictor",
    ];
    for key in map.keys() {
        if !known.contains(&key.as_str()) {
            return Err(err(key, "unknown configuration key"));
        }
    }

    let get_f64 = |key: &str, default: f64| -> Result<f64, ConfigError> {
        match map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| err(key, format!("`{v}` is not a number"))),
        }
    };
    let get_usize = |key: &str| -> Result<Option<usize>, ConfigError> {
        match map.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| err(key, format!("`{v}` is not a non-negative integer"))),
        }
    };
    let get_predictor = |key: &str, default: PredictorChoice| -> Result<PredictorChoice, ConfigError> {
        match map.get(key).map(String::as_str) {
            None => Ok(default),
            Some("none") => Ok(PredictorChoice::None),
            Some("pwfrg") => Ok(PredictorChoice::Pwfrg),
            Some("mcculloch") => Ok(PredictorChoice::Mcculloch),
            Some(v) => Err(err(key, format!("`{v}` is not one of none|pwfrg|mcculloch"))),
        }
    };

    let m_max = get_usize("m_max")?.ok_or_else(|| err("m_max", "missing (required)"))?;
    let two_n_max =
        get_usize("two_n_max")?.ok_or_else(|| err("two_n_max", "missing (required)"))?;
    let output_path = map
        .get("output_path")
        .ok_or_else(|| err("output_path", "missing (required)"))?
        .into();

    let mut run = RunConfig::new(get_f64("delta", 0.0)?, m_max, two_n_max);
    run.j = get_f64("j", 1.0)?;
    run.predictor = get_predictor("predictor", PredictorChoice::None)?;
    run.lanczos_tol = get_f64("lanczos_tol", run.lanczos_tol)?;
    if let Some(v) = get_usize("lanczos_max_iter")? {
        run.lanczos_max_iter = v;
    }
    run.lanczos_mode = match map.get("lanczos_mode").map(String::as_str) {
        None | Some("converge") => LanczosModeConfig::Converge,
        Some("single_step") => LanczosModeConfig::SingleStep,
        Some(v) => {
            return Err(err(
                "lanczos_mode",
                format!("`{v}` is not one of converge|single_step"),
            ))
        }
    };
    run.pinv_eps = get_f64("pinv_eps", run.pinv_eps)?;
    run.degeneracy_tol = get_f64("degeneracy_tol", run.degeneracy_tol)?;
    if let Some(v) = get_usize("seed")? {
        run.seed = v as u64;
    }
    run.sz_sector_restriction = match map.get("sz_sector_restriction").map(String::as_str) {
        None | Some("0") | Some("false") => false,
        Some("1") | Some("true") => true,
        Some(v) => {
            return Err(err(
                "sz_sector_restriction",
                format!("`{v}` is not a boolean (0/1/true/false)"),
            ))
        }
    };
    let compare_predictor = get_predictor("compare_predictor", PredictorChoice::None)?;

    if let Err(e) = run.validate() {
        // The engine names the offending field; forward it.
        let text = e.to_string();
        let field = known
            .iter()
            .find(|k| text.contains(*k))
            .copied()
            .unwrap_or("config");
        return Err(err(field, text));
    }

    Ok(CliConfig {
        run,
        output_path,
        compare_predictor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "m_max = 16\ntwo_n_max = 24\noutput_path = /tmp/run.csv\n";

    #[test]
    fn minimal_config_with_defaults() {
        let cfg = parse_config(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.run.m_max, 16);
        assert_eq!(cfg.run.two_n_max, 24);
        assert_eq!(cfg.run.j, 1.0);
        assert_eq!(cfg.run.delta, 0.0);
        assert_eq!(cfg.run.predictor, PredictorChoice::None);
        assert_eq!(cfg.run.lanczos_max_iter, 500);
        assert_eq!(cfg.summary_path(), PathBuf::from("/tmp/run.summary"));
    }

    #[test]
    fn overrides_win() {
        let cfg = parse_config(
            MINIMAL,
            &["delta=0.1".into(), "predictor=pwfrg".into(), "m_max=64".into()],
        )
        .unwrap();
        assert_eq!(cfg.run.delta, 0.1);
        assert_eq!(cfg.run.predictor, PredictorChoice::Pwfrg);
        assert_eq!(cfg.run.m_max, 64);
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse_config("m_max = 16\noutput_path = x.csv\n", &[]).unwrap_err();
        assert_eq!(e.field, "two_n_max");
        let e = parse_config(MINIMAL, &["predictor=magic".into()]).unwrap_err();
        assert_eq!(e.field, "predictor");
        let e = parse_config(MINIMAL, &["m_max=2".into()]).unwrap_err();
        assert_eq!(e.field, "m_max");
        let e = parse_config(MINIMAL, &["frobnicate=1".into()]).unwrap_err();
        assert_eq!(e.field, "frobnicate");
        let e = parse_config(MINIMAL, &["two_n_max=7".into()]).unwrap_err();
        assert_eq!(e.field, "two_n_max");
    }

    #[test]
    fn float_round_trip() {
        for x in [1.0 / 3.0, -0.4431471805599453, 1e-12, 6.02e23] {
            let s = format_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }
}
