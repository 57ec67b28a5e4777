use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dilation::DilationStructure;
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{
    BracketTable, CarnotGroup, CarnotSpace, Euclidean, ExpSpace, FlatTensor, NonstandardPlane,
    NumericExpChart, Snowflake, SphereChart, StereographicSphereTensor,
};

/// Metric tensors available to `riemannian(...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "tensor")]
pub enum TensorSpec {
    Flat { dim: usize },
    Sphere,
}

/// Description of a built-in dilation structure.
///
/// Text forms: `euclidean 3`, `snowflake(euclidean 2, 0.5)`,
/// `nonstandard 1`, `carnot heisenberg`, `carnot engel`, `carnot free23`,
/// `carnot {json table}`, `riemannian sphere`, `riemannian flat 2`, `sphere`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SpaceSpec {
    Euclidean {
        dim: usize,
    },
    Snowflake {
        base: Box<SpaceSpec>,
        a: f64,
    },
    Nonstandard {
        theta: f64,
    },
    Carnot {
        name: String,
        table: BracketTable,
    },
    Riemannian {
        tensor: TensorSpec,
    },
    /// Unit sphere with closed-form geodesics.
    Sphere,
}

fn split_top(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            _ => {}
        }
        if ch == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(ch);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn head_args(s: &str) -> (String, Vec<String>) {
    let s = s.trim();
    let cut = s
        .find(|c: char| c == '(' || c.is_whitespace())
        .unwrap_or(s.len());
    let head = s[..cut].to_ascii_lowercase();
    let rest = s[cut..].trim();
    if rest.starts_with('(') && rest.ends_with(')') {
        (head, split_top(&rest[1..rest.len() - 1]))
    } else if rest.starts_with('{') {
        (head, vec![rest.to_string()])
    } else {
        (head, rest.split_whitespace().map(String::from).collect())
    }
}

fn num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::MalformedInput(format!("bad {what} `{s}`")))
}

fn fraction(s: &str) -> Result<f64> {
    match s.split_once('/') {
        Some((a, b)) => Ok(num::<f64>(a.trim(), "number")? / num::<f64>(b.trim(), "number")?),
        None => num(s, "number"),
    }
}

impl SpaceSpec {
    pub fn heisenberg() -> Self {
        SpaceSpec::Carnot {
            name: "heisenberg".into(),
            table: BracketTable::heisenberg(),
        }
    }

    pub fn carnot_preset(name: &str) -> Result<Self> {
        let table = match name {
            "heisenberg" | "h1" => BracketTable::heisenberg(),
            "engel" => BracketTable::engel(),
            "free23" => BracketTable::free_step2_rank3(),
            other => {
                if let Some(n) = other.strip_prefix("abelian") {
                    BracketTable::abelian(num(n, "dimension")?)
                } else {
                    return Err(Error::MalformedInput(format!(
                        "unknown Carnot group `{other}`"
                    )));
                }
            }
        };
        Ok(SpaceSpec::Carnot {
            name: name.to_string(),
            table,
        })
    }

    /// Builds the structure; invalid bracket tables are rejected.
    pub fn build<T: Real>(&self) -> Result<Box<dyn DilationStructure<T>>> {
        construct_space(self)
    }
}

impl FromStr for SpaceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, args) = head_args(s);
        let need = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::MalformedInput(format!(
                    "`{head}` expects {n} argument(s)"
                )))
            }
        };
        match head.as_str() {
            "euclidean" => {
                need(1)?;
                Ok(SpaceSpec::Euclidean {
                    dim: num(&args[0], "dimension")?,
                })
            }
            "snowflake" => {
                need(2)?;
                Ok(SpaceSpec::Snowflake {
                    base: Box::new(args[0].parse()?),
                    a: fraction(&args[1])?,
                })
            }
            "nonstandard" => {
                need(1)?;
                Ok(SpaceSpec::Nonstandard {
                    theta: fraction(&args[0])?,
                })
            }
            "carnot" => {
                need(1)?;
                let a = args[0].trim();
                if a.starts_with('{') {
                    Ok(SpaceSpec::Carnot {
                        name: "custom".into(),
                        table: BracketTable::from_json(a)?,
                    })
                } else {
                    SpaceSpec::carnot_preset(&a.to_ascii_lowercase())
                }
            }
            "heisenberg" => Ok(SpaceSpec::heisenberg()),
            "riemannian" => {
                let tensor = match args.first().map(|s| s.as_str()) {
                    Some("sphere") => TensorSpec::Sphere,
                    Some("flat") => TensorSpec::Flat {
                        dim: num(args.get(1).map(|s| s.as_str()).unwrap_or("2"), "dimension")?,
                    },
                    _ => {
                        return Err(Error::MalformedInput(
                            "riemannian expects `sphere` or `flat n`".into(),
                        ))
                    }
                };
                Ok(SpaceSpec::Riemannian { tensor })
            }
            "sphere" => Ok(SpaceSpec::Sphere),
            _ => Err(Error::MalformedInput(format!(
                "unknown space `{}`",
                s.trim()
            ))),
        }
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceSpec::Euclidean { dim } => write!(f, "euclidean {dim}"),
            SpaceSpec::Snowflake { base, a } => write!(f, "snowflake({base}, {a})"),
            SpaceSpec::Nonstandard { theta } => write!(f, "nonstandard {theta}"),
            SpaceSpec::Carnot { name, .. } => write!(f, "carnot {name}"),
            SpaceSpec::Riemannian {
                tensor: TensorSpec::Sphere,
            } => write!(f, "riemannian sphere"),
            SpaceSpec::Riemannian {
                tensor: TensorSpec::Flat { dim },
            } => write!(f, "riemannian flat {dim}"),
            SpaceSpec::Sphere => write!(f, "sphere"),
        }
    }
}

/// Builds the dilation structure described by `spec`.
pub fn construct_space<T: Real>(spec: &SpaceSpec) -> Result<Box<dyn DilationStructure<T>>> {
    Ok(match spec {
        SpaceSpec::Euclidean { dim } => {
            if *dim == 0 {
                return Err(Error::MalformedInput("dimension must be positive".into()));
            }
            Box::new(Euclidean::<T>::new(*dim))
        }
        SpaceSpec::Snowflake { base, a } => {
            let b = construct_space::<T>(base)?;
            Box::new(Snowflake::new(b, T::lit(*a)).ok_or_else(|| {
                Error::MalformedInput(format!("snowflake exponent {a} not in (0,1]"))
            })?)
        }
        SpaceSpec::Nonstandard { theta } => Box::new(NonstandardPlane::new(T::lit(*theta))),
        SpaceSpec::Carnot { name, table } => Box::new(CarnotSpace::new(
            CarnotGroup::<T>::new(table.clone())?,
            format!("carnot({name})"),
        )),
        SpaceSpec::Riemannian { tensor } => match tensor {
            TensorSpec::Flat { dim } => Box::new(ExpSpace::new(NumericExpChart::new(
                FlatTensor { dim: *dim },
                f64::INFINITY,
            ))),
            TensorSpec::Sphere => Box::new(ExpSpace::new(NumericExpChart::new(
                StereographicSphereTensor,
                2.5,
            ))),
        },
        SpaceSpec::Sphere => Box::new(ExpSpace::new(SphereChart::default())),
    })
}
