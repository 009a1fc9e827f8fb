//! JSON schemas for problem configurations and product cycles.
//!
//! Complex numbers are always `[re, im]` pairs. Cycle anchors may instead be
//! symbolic (`"t11"`, `"t21+1"`, `"t12+tau"`) so that a cycle rebuilt for a
//! perturbed configuration follows the moving marked point.

use anyhow::{anyhow, bail, Context, Result};
use rw_core::config::ProblemConfig;
use rw_core::elliptic::ModularParam;
use rw_core::integrator::{pochhammer, ProductCycle};
use rw_core::Cx;
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
pub struct ConfigFile {
    pub tau: [f64; 2],
    pub t1: Vec<[f64; 2]>,
    pub t2: Vec<[f64; 2]>,
    pub c: [f64; 2],
    pub c10: [f64; 2],
    pub c20: [f64; 2],
    pub c1: Vec<[f64; 2]>,
    pub c2: Vec<[f64; 2]>,
    pub c1_inf: [f64; 2],
    pub c2_inf: [f64; 2],
}

fn cx(v: [f64; 2]) -> Cx {
    Cx::new(v[0], v[1])
}

impl ConfigFile {
    pub fn into_config(self) -> Result<ProblemConfig> {
        let tau = ModularParam::new(cx(self.tau))
            .map_err(|e| anyhow!("bad tau: {e}"))?;
        Ok(ProblemConfig {
            tau,
            t1: self.t1.into_iter().map(cx).collect(),
            t2: self.t2.into_iter().map(cx).collect(),
            c: cx(self.c),
            c10: cx(self.c10),
            c20: cx(self.c20),
            c1: self.c1.into_iter().map(cx).collect(),
            c2: self.c2.into_iter().map(cx).collect(),
            c1_inf: cx(self.c1_inf),
            c2_inf: cx(self.c2_inf),
        })
    }
}

pub fn load_config(path: &std::path::Path) -> Result<ProblemConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let file: ConfigFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    file.into_config()
}

/// One anchor of a Pochhammer loop: a literal point or a reference to a
/// marked point, optionally shifted by a period.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Anchor {
    Literal([f64; 2]),
    Symbolic(String),
}

impl Anchor {
    pub fn resolve(&self, cfg: &ProblemConfig) -> Result<Cx> {
        match self {
            Anchor::Literal(v) => Ok(cx(*v)),
            Anchor::Symbolic(s) => {
                let (base, shift) = match s.split_once('+') {
                    None => (s.as_str(), Cx::new(0.0, 0.0)),
                    Some((b, "1")) => (b, Cx::new(1.0, 0.0)),
                    Some((b, "tau")) => (b, cfg.tau.tau()),
                    Some((_, other)) => bail!("unknown anchor shift {other:?}"),
                };
                let digits = base
                    .strip_prefix('t')
                    .ok_or_else(|| anyhow!("bad anchor {s:?}"))?;
                if digits.len() != 2 {
                    bail!("bad anchor {s:?}: want t<k><p>");
                }
                let k: usize = digits[..1].parse()?;
                let p: usize = digits[1..].parse()?;
                let n = if k == 1 { cfg.n1() } else { cfg.n2() };
                if !(1..=2).contains(&k) || !(1..=n).contains(&p) {
                    bail!("anchor {s:?} out of range");
                }
                Ok(cfg.t(k, p) + shift)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopSpec {
    pub a: Anchor,
    pub b: Anchor,
    pub radius: f64,
}

/// A product of two Pochhammer double loops, one per variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleSpec {
    pub gamma1: LoopSpec,
    pub gamma2: LoopSpec,
}

impl CycleSpec {
    pub fn build(&self, cfg: &ProblemConfig) -> rw_core::error::Result<ProductCycle> {
        let to_geo = |e: anyhow::Error| rw_core::error::Error::Geometry(e.to_string());
        Ok(ProductCycle {
            gamma1: pochhammer(
                self.gamma1.a.resolve(cfg).map_err(to_geo)?,
                self.gamma1.b.resolve(cfg).map_err(to_geo)?,
                self.gamma1.radius,
            )?,
            gamma2: pochhammer(
                self.gamma2.a.resolve(cfg).map_err(to_geo)?,
                self.gamma2.b.resolve(cfg).map_err(to_geo)?,
                self.gamma2.radius,
            )?,
        })
    }
}

pub fn load_cycle(path: &std::path::Path) -> Result<CycleSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
