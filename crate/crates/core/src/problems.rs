//! Closed-form test problems for `d_tt u - Laplace u = f` on `(0,1)^2 x (0,1]`
//! with homogeneous Dirichlet data.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::Error;
use crate::fem::SpatialFunction;

pub type SpaceTimeFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type SpaceTimeGradFn = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    /// `sin(4 pi t) x1 (x1-1) x2 (x2-1)`
    Poly,
    /// `sin(4 pi t) sin(2 pi x1) sin(2 pi x2)`
    Trig,
    /// standing wave with `f = 0`, used for the energy check
    Energy,
}

impl ProblemId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemId::Poly => "poly",
            ProblemId::Trig => "trig",
            ProblemId::Energy => "energy",
        }
    }

    pub fn build(&self) -> WaveProblem {
        match self {
            ProblemId::Poly => problem_poly(),
            ProblemId::Trig => problem_trig(),
            ProblemId::Energy => problem_energy(),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "poly" => Ok(ProblemId::Poly),
            "trig" => Ok(ProblemId::Trig),
            "energy" => Ok(ProblemId::Energy),
            other => Err(Error::invalid(format!(
                "unknown problem '{other}' (expected poly, trig or energy)"
            ))),
        }
    }
}

/// Exact solution and data of a wave problem.
#[derive(Clone)]
pub struct WaveProblem {
    pub id: ProblemId,
    pub exact_u: SpaceTimeFn,
    pub exact_dtu: SpaceTimeFn,
    pub exact_grad: SpaceTimeGradFn,
    pub rhs_f: SpaceTimeFn,
    pub u0: SpatialFunction,
    pub u1: SpatialFunction,
    pub final_time: f64,
}

impl fmt::Debug for WaveProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaveProblem")
            .field("id", &self.id)
            .field("final_time", &self.final_time)
            .finish()
    }
}

impl WaveProblem {
    pub fn u(&self, x1: f64, x2: f64, t: f64) -> f64 {
        (self.exact_u)(x1, x2, t)
    }

    pub fn dtu(&self, x1: f64, x2: f64, t: f64) -> f64 {
        (self.exact_dtu)(x1, x2, t)
    }

    pub fn grad(&self, x1: f64, x2: f64, t: f64) -> [f64; 2] {
        (self.exact_grad)(x1, x2, t)
    }

    pub fn f(&self, x1: f64, x2: f64, t: f64) -> f64 {
        (self.rhs_f)(x1, x2, t)
    }

    /// `f(., t)` as a spatial function.
    pub fn f_at(&self, t: f64) -> SpatialFunction {
        let f = self.rhs_f.clone();
        SpatialFunction::new(move |x1, x2| f(x1, x2, t))
    }

    /// `u(., t)` with gradient.
    pub fn u_at(&self, t: f64) -> SpatialFunction {
        let (u, g) = (self.exact_u.clone(), self.exact_grad.clone());
        SpatialFunction::with_gradient(move |x1, x2| u(x1, x2, t), move |x1, x2| g(x1, x2, t))
    }

    /// `d_t u(., t)` (no gradient).
    pub fn dtu_at(&self, t: f64) -> SpatialFunction {
        let v = self.exact_dtu.clone();
        SpatialFunction::new(move |x1, x2| v(x1, x2, t))
    }
}

fn bubble(x: f64) -> f64 {
    x * (x - 1.0)
}

pub fn problem_poly() -> WaveProblem {
    let w = 4.0 * PI;
    let p = |x1: f64, x2: f64| bubble(x1) * bubble(x2);
    let grad_p = |x1: f64, x2: f64| [(2.0 * x1 - 1.0) * bubble(x2), bubble(x1) * (2.0 * x2 - 1.0)];
    WaveProblem {
        id: ProblemId::Poly,
        exact_u: Arc::new(move |x1, x2, t| (w * t).sin() * p(x1, x2)),
        exact_dtu: Arc::new(move |x1, x2, t| w * (w * t).cos() * p(x1, x2)),
        exact_grad: Arc::new(move |x1, x2, t| {
            let s = (w * t).sin();
            let g = grad_p(x1, x2);
            [s * g[0], s * g[1]]
        }),
        rhs_f: Arc::new(move |x1, x2, t| {
            -(w * t).sin() * (16.0 * PI * PI * p(x1, x2) + 2.0 * bubble(x1) + 2.0 * bubble(x2))
        }),
        u0: SpatialFunction::zero(),
        u1: SpatialFunction::with_gradient(
            move |x1, x2| w * p(x1, x2),
            move |x1, x2| {
                let g = grad_p(x1, x2);
                [w * g[0], w * g[1]]
            },
        ),
        final_time: 1.0,
    }
}

pub fn problem_trig() -> WaveProblem {
    let w = 4.0 * PI;
    let k = 2.0 * PI;
    let s = move |x1: f64, x2: f64| (k * x1).sin() * (k * x2).sin();
    let grad_s = move |x1: f64, x2: f64| {
        [k * (k * x1).cos() * (k * x2).sin(), k * (k * x1).sin() * (k * x2).cos()]
    };
    WaveProblem {
        id: ProblemId::Trig,
        exact_u: Arc::new(move |x1, x2, t| (w * t).sin() * s(x1, x2)),
        exact_dtu: Arc::new(move |x1, x2, t| w * (w * t).cos() * s(x1, x2)),
        exact_grad: Arc::new(move |x1, x2, t| {
            let a = (w * t).sin();
            let g = grad_s(x1, x2);
            [a * g[0], a * g[1]]
        }),
        rhs_f: Arc::new(move |x1, x2, t| -8.0 * PI * PI * (w * t).sin() * s(x1, x2)),
        u0: SpatialFunction::zero(),
        u1: SpatialFunction::with_gradient(
            move |x1, x2| w * s(x1, x2),
            move |x1, x2| {
                let g = grad_s(x1, x2);
                [w * g[0], w * g[1]]
            },
        ),
        final_time: 1.0,
    }
}

pub fn problem_energy() -> WaveProblem {
    let w = std::f64::consts::SQRT_2 * PI;
    let s = |x1: f64, x2: f64| (PI * x1).sin() * (PI * x2).sin();
    let grad_s = |x1: f64, x2: f64| {
        [PI * (PI * x1).cos() * (PI * x2).sin(), PI * (PI * x1).sin() * (PI * x2).cos()]
    };
    WaveProblem {
        id: ProblemId::Energy,
        exact_u: Arc::new(move |x1, x2, t| (w * t).cos() * s(x1, x2)),
        exact_dtu: Arc::new(move |x1, x2, t| -w * (w * t).sin() * s(x1, x2)),
        exact_grad: Arc::new(move |x1, x2, t| {
            let a = (w * t).cos();
            let g = grad_s(x1, x2);
            [a * g[0], a * g[1]]
        }),
        rhs_f: Arc::new(|_, _, _| 0.0),
        u0: SpatialFunction::with_gradient(s, grad_s),
        u1: SpatialFunction::zero(),
        final_time: 1.0,
    }
}
