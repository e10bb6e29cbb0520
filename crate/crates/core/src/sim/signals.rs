//! Regression functions of the simulation designs. Indicator boundaries are
//! closed (≤).

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One additive component g(x_j) of the sparse additive design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Component {
    /// scale · sin(freq · x + phase)
    Wave { scale: f64, freq: f64, phase: f64 },
    /// `levels[i]` on [knots[i−1], knots[i]); a knot belongs to the right piece.
    Step { knots: Vec<f64>, levels: Vec<f64> },
    /// Piecewise linear through (knots[i], values[i]), flat outside.
    Spline { knots: Vec<f64>, values: Vec<f64> },
    /// Σ height · exp(−((x − centre)/width)²)
    Hills {
        centres: Vec<f64>,
        heights: Vec<f64>,
        widths: Vec<f64>,
    },
}

impl Component {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Component::Wave { scale, freq, phase } => scale * (freq * x + phase).sin(),
            Component::Step { knots, levels } => levels[knots.partition_point(|&k| k <= x)],
            Component::Spline { knots, values } => {
                let i = knots.partition_point(|&k| k <= x);
                if i == 0 {
                    values[0]
                } else if i == knots.len() {
                    values[knots.len() - 1]
                } else {
                    let w = (x - knots[i - 1]) / (knots[i] - knots[i - 1]);
                    values[i - 1] + w * (values[i] - values[i - 1])
                }
            }
            Component::Hills {
                centres,
                heights,
                widths,
            } => centres
                .iter()
                .zip(heights)
                .zip(widths)
                .map(|((c, h), w)| h * (-((x - c) / w).powi(2)).exp())
                .sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Component::Wave { scale, freq, phase } => {
                [scale, freq, phase].iter().all(|v| v.is_finite())
            }
            Component::Step { knots, levels } => levels.len() == knots.len() + 1 && sorted(knots),
            Component::Spline { knots, values } => {
                !knots.is_empty()
                    && values.len() == knots.len()
                    && knots.windows(2).all(|w| w[0] < w[1])
            }
            Component::Hills {
                centres,
                heights,
                widths,
            } => {
                heights.len() == centres.len()
                    && widths.len() == centres.len()
                    && widths.iter().all(|&w| w > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "malformed additive component {self:?}"
            )))
        }
    }
}

fn sorted(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] <= w[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum Signal {
    /// 1(1/3 ≤ x₁, x₂ ≤ 2/3)
    Rectangular,
    /// 1((x₁−½)² + (x₂−½)² ≤ 1/16)
    Circular,
    /// sin(x₁) + cos(x₂)
    SineCosine,
    /// 20·exp(−5((x₁−½)² + (x₂−½)² − 0.9(x₁−½)(x₂−½)))
    Elliptical,
    /// sign(x₁)·sign(x₂), with sign(0) = 1
    Xor,
    Zero,
    /// g₁(x₁) + … + g_m(x_m)
    Additive {
        components: Vec<Component>,
    },
}

/// Identifiers accepted by [`Signal::by_name`].
pub const SIGNAL_NAMES: [&str; 10] = [
    "rectangular",
    "circular",
    "sine_cosine",
    "elliptical",
    "xor",
    "zero",
    "additive_smooth",
    "additive_step",
    "additive_linear",
    "additive_hills",
];

impl Signal {
    pub fn by_name(name: &str) -> Result<Signal> {
        Ok(match name {
            "rectangular" => Signal::Rectangular,
            "circular" => Signal::Circular,
            "sine_cosine" => Signal::SineCosine,
            "elliptical" => Signal::Elliptical,
            "xor" => Signal::Xor,
            "zero" => Signal::Zero,
            "additive_smooth" => Signal::Additive {
                components: smooth_family(),
            },
            "additive_step" => Signal::Additive {
                components: step_family(),
            },
            "additive_linear" => Signal::Additive {
                components: linear_family(),
            },
            "additive_hills" => Signal::Additive {
                components: hills_family(),
            },
            other => return Err(Error::UnknownSignal(other.to_string())),
        })
    }

    /// Number of leading coordinates the signal reads.
    pub fn arity(&self) -> usize {
        match self {
            Signal::Zero => 0,
            Signal::Additive { components } => components.len(),
            _ => 2,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if let Signal::Additive { components } = self {
            for c in components {
                c.validate()?;
            }
        }
        if self.arity() > d {
            return Err(Error::InvalidArgument(format!(
                "signal needs {} covariates, design has {d}",
                self.arity()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Signal::Rectangular => {
                let inside = |v: f64| (1.0 / 3.0..=2.0 / 3.0).contains(&v);
                indicator(inside(x[0]) && inside(x[1]))
            }
            Signal::Circular => {
                indicator((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2) <= 1.0 / 16.0)
            }
            Signal::SineCosine => x[0].sin() + x[1].cos(),
            Signal::Elliptical => {
                let (a, b) = (x[0] - 0.5, x[1] - 0.5);
                20.0 * (-5.0 * (a * a + b * b - 0.9 * a * b)).exp()
            }
            Signal::Xor => sign(x[0]) * sign(x[1]),
            Signal::Zero => 0.0,
            Signal::Additive { components } => {
                components.iter().zip(x).map(|(g, &v)| g.eval(v)).sum()
            }
        }
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

// Representatives of the four additive families on [−2.5, 2.5].

fn smooth_family() -> Vec<Component> {
    vec![
        Component::Wave {
            scale: 1.5,
            freq: 1.0,
            phase: 0.0,
        },
        Component::Wave {
            scale: -1.0,
            freq: 1.5,
            phase: FRAC_PI_2,
        },
        Component::Wave {
            scale: 1.0,
            freq: 2.0,
            phase: 0.0,
        },
        Component::Wave {
            scale: 1.2,
            freq: 0.8,
            phase: FRAC_PI_2,
        },
    ]
}

fn step_family() -> Vec<Component> {
    vec![
        Component::Step {
            knots: vec![-1.0, 1.0],
            levels: vec![-1.5, 0.5, 1.5],
        },
        Component::Step {
            knots: vec![-1.5, 0.0, 1.5],
            levels: vec![2.0, -1.0, 1.0, -2.0],
        },
        Component::Step {
            knots: vec![-1.5, -0.5, 0.5, 1.5],
            levels: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
        },
        Component::Step {
            knots: vec![-2.0, 0.5],
            levels: vec![1.5, -0.5, 1.0],
        },
    ]
}

fn linear_family() -> Vec<Component> {
    let knots = vec![-2.5, -1.0, 0.5, 1.5, 2.5];
    vec![
        Component::Spline {
            knots: knots.clone(),
            values: vec![-2.0, 1.0, -1.0, 1.5, 0.5],
        },
        Component::Spline {
            knots: knots.clone(),
            values: vec![1.5, -0.5, 0.5, -1.5, 2.0],
        },
        Component::Spline {
            knots: knots.clone(),
            values: vec![-1.0, -1.0, 2.0, 0.0, -2.0],
        },
        Component::Spline {
            knots,
            values: vec![0.0, 2.0, 0.0, -1.0, 1.0],
        },
    ]
}

fn hills_family() -> Vec<Component> {
    vec![
        Component::Hills {
            centres: vec![-1.5, 0.0, 1.5],
            heights: vec![2.0, -1.5, 2.0],
            widths: vec![0.4, 0.5, 0.4],
        },
        Component::Hills {
            centres: vec![-1.0, 1.0],
            heights: vec![-2.0, 2.0],
            widths: vec![0.6, 0.6],
        },
        Component::Hills {
            centres: vec![-2.0, -0.5, 1.0, 2.0],
            heights: vec![1.5, 1.5, -1.5, 1.5],
            widths: vec![0.3, 0.3, 0.4, 0.3],
        },
        Component::Hills {
            centres: vec![0.0],
            heights: vec![3.0],
            widths: vec![0.8],
        },
    ]
}
