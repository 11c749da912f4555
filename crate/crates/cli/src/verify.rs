//! Golden regression suite: small studies whose CSV output is stored in the
//! crate and must be reproduced byte for byte.

use crate::config::ExperimentConfig;
use crate::output::render_csv;
use crate::study::{run_study, StudyError};

/// `(name, config text, expected CSV)`.
pub const GOLDEN: [(&str, &str, &str); 3] = [
    ("be_k0_space", include_str!("../golden/be_k0_space.conf"), include_str!("../golden/be_k0_space.csv")),
    ("cn_k1_space", include_str!("../golden/cn_k1_space.conf"), include_str!("../golden/cn_k1_space.csv")),
    ("be_k1_time", include_str!("../golden/be_k1_time.conf"), include_str!("../golden/be_k1_time.csv")),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// First differing line, `(line number, expected, actual)`.
    pub mismatch: Option<(usize, String, String)>,
}

fn first_difference(expected: &str, actual: &str) -> Option<(usize, String, String)> {
    let mut e = expected.lines();
    let mut a = actual.lines();
    for line in 1.. {
        match (e.next(), a.next()) {
            (None, None) => return None,
            (x, y) if x == y => continue,
            (x, y) => return Some((line, x.unwrap_or("<end>").to_string(), y.unwrap_or("<end>").to_string())),
        }
    }
    None
}

/// Runs one golden case and returns its freshly computed CSV.
pub fn golden_csv(config_text: &str) -> Result<String, StudyError> {
    let config = ExperimentConfig::parse(config_text)?;
    Ok(render_csv(&run_study(&config)?.report))
}

pub fn verify_all() -> Result<Vec<GoldenOutcome>, StudyError> {
    GOLDEN
        .iter()
        .map(|&(name, conf, expected)| {
            let actual = golden_csv(conf)?;
            let mismatch = first_difference(expected, &actual);
            Ok(GoldenOutcome { name, passed: mismatch.is_none(), mismatch })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_reporting() {
        assert_eq!(first_difference("a\nb\n", "a\nb\n"), None);
        assert_eq!(first_difference("a\nb\n", "a\nc\n"), Some((2, "b".into(), "c".into())));
        assert_eq!(first_difference("a\n", "a\nc\n"), Some((2, "<end>".into(), "c".into())));
    }

    #[test]
    fn golden_configs_parse() {
        for (name, conf, csv) in GOLDEN {
            let c = ExperimentConfig::parse(conf).unwrap();
            assert_eq!(c.label, name);
            assert!(csv.starts_with(crate::output::CSV_HEADER), "{name}");
        }
    }
}
