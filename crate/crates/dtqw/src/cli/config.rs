//! Sweep configuration: TOML fixture files merged with command-line overrides.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use evalexpr::{ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Value};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::protocol::{registry_lookup, CoinScaling, ProtocolSpec, Symbol};

/// A number or an arithmetic expression in `pi` and the swept angle.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Expr {
    Number(f64),
    Text(String),
}

impl Expr {
    pub fn eval(&self, vars: &[(&str, f64)]) -> Result<f64> {
        match self {
            Expr::Number(v) => Ok(*v),
            Expr::Text(s) => eval_expr(s, vars),
        }
    }
}

/// Integer literals become floats so that `1/3` is not integer division.
fn floatify(src: &str) -> String {
    let chars: Vec<char> = src.chars().collect();
    let mut out = String::with_capacity(src.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let prev_ident = i > 0 && (chars[i - 1].is_alphanumeric() || chars[i - 1] == '_' || chars[i - 1] == '.');
        if c.is_ascii_digit() && !prev_ident {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let mut lit: String = chars[start..i].iter().collect();
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                lit.push(chars[i]);
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    lit.push(chars[i]);
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    lit.push(chars[i]);
                    i += 1;
                }
            } else if !lit.contains('.') {
                lit.push_str(".0");
            }
            out.push_str(&lit);
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}

/// Evaluates an expression with `pi` and the given variables bound.
pub fn eval_expr(src: &str, vars: &[(&str, f64)]) -> Result<f64> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    let bad = |e: evalexpr::EvalexprError<DefaultNumericTypes>| Error::Config(format!("cannot evaluate `{src}`: {e}"));
    ctx.set_value("pi".into(), Value::Float(PI)).map_err(bad)?;
    for (name, v) in vars {
        ctx.set_value((*name).into(), Value::Float(*v)).map_err(bad)?;
    }
    let v = evalexpr::eval_number_with_context(&floatify(src), &ctx).map_err(bad)?;
    if !v.is_finite() {
        return Err(Error::Config(format!("`{src}` evaluates to {v}")));
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
enum StepsDoc {
    One(u32),
    Many(Vec<u32>),
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepDoc {
    symbol: String,
    start: Expr,
    stop: Expr,
    count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    protocol: Option<String>,
    steps: Option<StepsDoc>,
    grid: Option<usize>,
    phi: Option<Expr>,
    step_independent: Option<bool>,
    #[serde(default)]
    angles: BTreeMap<String, Expr>,
    sweep: Option<SweepDoc>,
}

/// The swept parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Angle(Symbol),
    Steps,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Angle(s) => s.name(),
            SweepParam::Steps => "T",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// Command-line overrides, all optional.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub protocol: Option<String>,
    pub set: Vec<String>,
    pub sweep: Option<String>,
    pub steps: Option<Vec<u32>>,
    pub grid: Option<usize>,
    pub step_independent: bool,
}

/// A fully resolved sweep.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub template: ProtocolSpec,
    /// Angle expressions; may reference the swept angle.
    pub angles: BTreeMap<Symbol, Expr>,
    pub sweep: Option<Sweep>,
    pub steps: Vec<u32>,
    pub grid: usize,
}

fn parse_sweep(text: &str) -> Result<SweepDoc> {
    let parts: Vec<&str> = text.split(':').collect();
    let [symbol, start, stop, count] = parts[..] else {
        return Err(Error::Config(format!("sweep `{text}` is not SYMBOL:START:STOP:COUNT")));
    };
    let count = count.trim().parse().map_err(|_| Error::Config(format!("sweep count `{count}` is not an integer")))?;
    Ok(SweepDoc { symbol: symbol.trim().into(), start: Expr::Text(start.into()), stop: Expr::Text(stop.into()), count })
}

impl SweepConfig {
    /// Loads an optional TOML fixture and applies overrides.
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self> {
        let doc: ConfigDoc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => ConfigDoc::default(),
        };
        Self::resolve(doc, ov)
    }

    /// Parses TOML text and applies overrides.
    pub fn from_toml(text: &str, ov: &Overrides) -> Result<Self> {
        let doc: ConfigDoc = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::resolve(doc, ov)
    }

    fn resolve(mut doc: ConfigDoc, ov: &Overrides) -> Result<Self> {
        let id = ov.protocol.clone().or(doc.protocol.take()).ok_or_else(|| Error::Config("no protocol given".into()))?;
        let mut template = registry_lookup(&id)?;
        if let Some(phi) = &doc.phi {
            template = template.with_phi(phi.eval(&[])?)?;
        }
        if ov.step_independent || doc.step_independent.unwrap_or(false) {
            template = template.with_scaling(CoinScaling::StepIndependent);
        }
        let mut angles: BTreeMap<Symbol, Expr> = BTreeMap::new();
        for (name, e) in doc.angles {
            angles.insert(Symbol::parse(&name)?, e);
        }
        for item in &ov.set {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("`--set {item}` is not ANGLE=VALUE")))?;
            angles.insert(Symbol::parse(name.trim())?, Expr::Text(value.trim().into()));
        }
        let sweep_doc = match &ov.sweep {
            Some(s) => Some(parse_sweep(s)?),
            None => doc.sweep,
        };
        let sweep = match sweep_doc {
            None => None,
            Some(sd) => {
                if sd.count < 2 {
                    return Err(Error::Config(format!("sweep needs at least 2 samples, got {}", sd.count)));
                }
                let (a, b) = (sd.start.eval(&[])?, sd.stop.eval(&[])?);
                if a == b {
                    return Err(Error::Config("empty sweep range".into()));
                }
                let values = crate::topology::linspace(a, b, sd.count);
                let param = if sd.symbol == "T" { SweepParam::Steps } else { SweepParam::Angle(Symbol::parse(&sd.symbol)?) };
                if let SweepParam::Angle(s) = param {
                    if angles.contains_key(&s) {
                        return Err(Error::Config(format!("`{s}` is both swept and fixed")));
                    }
                }
                Some(Sweep { param, values })
            }
        };
        let mut steps = match (&ov.steps, doc.steps) {
            (Some(v), _) => v.clone(),
            (None, Some(StepsDoc::One(t))) => vec![t],
            (None, Some(StepsDoc::Many(v))) => v,
            (None, None) => vec![1],
        };
        if let Some(Sweep { param: SweepParam::Steps, values }) = &sweep {
            steps = values
                .iter()
                .map(|v| {
                    let r = v.round();
                    if (v - r).abs() > 1e-9 || r < 1.0 {
                        Err(Error::Config(format!("step sweep value {v} is not a positive integer")))
                    } else {
                        Ok(r as u32)
                    }
                })
                .collect::<Result<_>>()?;
        }
        if steps.is_empty() || steps.contains(&0) {
            return Err(Error::Config("step numbers must be positive".into()));
        }
        let grid = ov.grid.or(doc.grid).unwrap_or(match template.dimension {
            1 => 256,
            2 => 64,
            _ => 32,
        });
        if grid < 8 {
            return Err(Error::Config(format!("grid must have at least 8 points per axis, got {grid}")));
        }
        let cfg = SweepConfig { template, angles, sweep, steps, grid };
        // Every symbol must be covered, and no stray ones given.
        let swept = match cfg.sweep.as_ref().map(|s| s.param) {
            Some(SweepParam::Angle(s)) => Some(s),
            _ => None,
        };
        let used = cfg.template.symbols();
        for s in cfg.angles.keys() {
            if !used.contains(s) {
                return Err(Error::Config(format!("protocol `{}` has no angle `{s}`", cfg.template.id)));
            }
        }
        for s in &used {
            if !cfg.angles.contains_key(s) && swept != Some(*s) {
                return Err(Error::Config(format!("angle `{s}` of `{}` is not set", cfg.template.id)));
            }
        }
        if let Some(s) = swept {
            if !used.contains(&s) {
                return Err(Error::Config(format!("protocol `{}` has no angle `{s}`", cfg.template.id)));
            }
        }
        // Surface expression errors before any work starts.
        cfg.spec_at(cfg.steps[0], cfg.sample_values().first().copied())?;
        Ok(cfg)
    }

    /// The swept angle, if the sweep is over an angle.
    pub fn swept_angle(&self) -> Option<Symbol> {
        match self.sweep.as_ref()?.param {
            SweepParam::Angle(s) => Some(s),
            SweepParam::Steps => None,
        }
    }

    fn sample_values(&self) -> Vec<f64> {
        match &self.sweep {
            Some(Sweep { param: SweepParam::Angle(_), values }) => values.clone(),
            _ => vec![],
        }
    }

    /// The protocol at step `t` with the swept angle (if any) set to `value`.
    pub fn spec_at(&self, t: u32, value: Option<f64>) -> Result<ProtocolSpec> {
        let mut vars: Vec<(&str, f64)> = Vec::new();
        let mut vals: Vec<(Symbol, f64)> = Vec::new();
        if let (Some(s), Some(v)) = (self.swept_angle(), value) {
            vars.push((s.name(), v));
            vals.push((s, v));
        }
        for (s, e) in &self.angles {
            vals.push((*s, e.eval(&vars)?));
        }
        self.template.clone().with_steps(t).with_angles(&vals)
    }
}
