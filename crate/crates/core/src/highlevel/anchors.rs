//! Fixed "good"/"bad" anchor embeddings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;

use super::highlevel_input;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::lowlevel::dot;
use crate::nnet::{forward, EncoderParams};

/// Anchors further than this from unit norm are renormalized with a warning.
pub const ANCHOR_WARN_TOL: f64 = 1e-3;
const RENORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorPair {
    good: Vec<f64>,
    bad: Vec<f64>,
    provenance: String,
}

fn normalized(mut v: Vec<f64>, which: &str) -> Result<Vec<f64>> {
    let n = dot(&v, &v).sqrt();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::InvalidArgument(format!("{which} anchor has norm {n}")));
    }
    if (n - 1.0).abs() > RENORM_TOL {
        if (n - 1.0).abs() > ANCHOR_WARN_TOL {
            warn!("{which} anchor has norm {n}; renormalizing");
        }
        v.iter_mut().for_each(|x| *x /= n);
    }
    Ok(v)
}

impl AnchorPair {
    pub fn new(good: Vec<f64>, bad: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if good.len() != bad.len() {
            return Err(Error::Dimension(format!(
                "anchor lengths differ: {} vs {}",
                good.len(),
                bad.len()
            )));
        }
        if good.len() < 2 {
            return Err(Error::InvalidArgument("anchors need at least two dimensions".into()));
        }
        let good = normalized(good, "good")?;
        let bad = normalized(bad, "bad")?;
        if good == bad {
            return Err(Error::InvalidArgument("good and bad anchors coincide".into()));
        }
        Ok(Self {
            good,
            bad,
            provenance: provenance.into(),
        })
    }

    pub fn good(&self) -> &[f64] {
        &self.good
    }

    pub fn bad(&self) -> &[f64] {
        &self.bad
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn dim(&self) -> usize {
        self.good.len()
    }

    /// Parses two lines of whitespace-separated decimals: good, then bad.
    pub fn parse(text: &str, provenance: impl Into<String>) -> Result<Self> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() != 2 {
            return Err(Error::Data(format!("anchor text must have 2 lines, found {}", lines.len())));
        }
        let parse_line = |l: &str| -> Result<Vec<f64>> {
            l.split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::Data(format!("bad anchor value {t:?}: {e}")))
                })
                .collect()
        };
        Self::new(parse_line(lines[0])?, parse_line(lines[1])?, provenance)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for v in [&self.good, &self.bad] {
            let line: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            writeln!(s, "{}", line.join(" ")).expect("write to string");
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, format!("file:{}", path.display())).map_err(|e| match e {
            Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn mean_direction(params: &EncoderParams, imgs: &[Image], side: usize, which: &str) -> Result<Vec<f64>> {
    if imgs.is_empty() {
        return Err(Error::InsufficientData(format!("no {which} exemplars")));
    }
    let mut sum = vec![0.0; params.config().projection_dim];
    for img in imgs {
        let z = forward(params, &highlevel_input(img, side)?)?.projected;
        sum.iter_mut().zip(&z).for_each(|(s, v)| *s += v);
    }
    let n = dot(&sum, &sum).sqrt();
    if !(n > 1e-12) {
        return Err(Error::Numeric(format!("{which} exemplar embeddings average to zero")));
    }
    Ok(sum.into_iter().map(|v| v / n).collect())
}

/// Anchors from the normalized mean embeddings of exemplar images.
pub fn bootstrap_anchors(params: &EncoderParams, good: &[Image], bad: &[Image], side: usize) -> Result<AnchorPair> {
    let g = mean_direction(params, good, side, "good")?;
    let b = mean_direction(params, bad, side, "bad")?;
    AnchorPair::new(g, b, "bootstrapped")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let g = vec![0.6, 0.8, 0.0];
        let b = vec![0.1f64, -0.2, 0.3];
        let nb = dot(&b, &b).sqrt();
        let pair = AnchorPair::new(g, b.iter().map(|x| x / nb).collect(), "test").unwrap();
        let text = pair.to_text();
        let again = AnchorPair::parse(&text, "x").unwrap();
        assert_eq!(again.to_text(), text);
        assert_eq!(again.good(), pair.good());
    }

    #[test]
    fn renormalizes_and_rejects() {
        let p = AnchorPair::parse("2 0\n0 3\n", "t").unwrap();
        assert_eq!(p.good(), &[1.0, 0.0]);
        assert_eq!(p.bad(), &[0.0, 1.0]);
        assert!(AnchorPair::parse("1 0\n1 0\n", "t").is_err());
        assert!(AnchorPair::parse("1 0\n", "t").is_err());
        assert!(AnchorPair::parse("0 0\n1 0\n", "t").is_err());
        assert!(AnchorPair::parse("1 x\n1 0\n", "t").is_err());
    }
}
