//! Bounded Nelder–Mead search with restart on stall.
//!
//! Parameters are searched in normalised coordinates `z ∈ [0, 1]`, linear or
//! logarithmic in the physical value; points outside the box are clamped
//! before evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub initial: f64,
    pub transform: Transform,
}

impl Parameter {
    pub fn new(name: &str, lower: f64, upper: f64, initial: f64, transform: Transform) -> Self {
        Self {
            name: name.to_string(),
            lower,
            upper,
            initial,
            transform,
        }
    }

    fn to_unit(&self, x: f64) -> f64 {
        match self.transform {
            Transform::Linear => (x - self.lower) / (self.upper - self.lower),
            Transform::Log => (x.ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln()),
        }
    }

    fn from_unit(&self, z: f64) -> f64 {
        let z = z.clamp(0.0, 1.0);
        let x = match self.transform {
            Transform::Linear => self.lower + z * (self.upper - self.lower),
            Transform::Log => (self.lower.ln() + z * (self.upper.ln() - self.lower.ln())).exp(),
        };
        x.clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSpace {
    pub entries: Vec<Parameter>,
}

impl ParameterSpace {
    pub fn new(entries: Vec<Parameter>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn initial(&self) -> Vec<f64> {
        self.entries.iter().map(|p| p.initial).collect()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.entries.is_empty() {
            v.push("parameter space is empty".to_string());
        }
        for p in &self.entries {
            if !(p.lower < p.upper) {
                v.push(format!("{}: lower must be < upper", p.name));
            }
            if !(p.lower <= p.initial && p.initial <= p.upper) {
                v.push(format!("{}: initial value outside bounds", p.name));
            }
            if p.transform == Transform::Log && !(p.lower > 0.0) {
                v.push(format!("{}: log transform needs positive bounds", p.name));
            }
        }
        v
    }

    fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        self.entries.iter().zip(x).map(|(p, &x)| p.to_unit(x)).collect()
    }

    fn from_unit(&self, z: &[f64]) -> Vec<f64> {
        self.entries.iter().zip(z).map(|(p, &z)| p.from_unit(z)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Maximum objective evaluations.
    pub budget: usize,
    /// Simplex edge in normalised coordinates at start and at each restart.
    pub initial_step: f64,
    pub max_restarts: usize,
    /// A simplex whose values and extent fall below these has stalled.
    pub f_tolerance: f64,
    pub x_tolerance: f64,
    /// Stop as soon as the objective reaches this value.
    pub target: Option<f64>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            budget: 1000,
            initial_step: 0.1,
            max_restarts: 3,
            f_tolerance: 1e-14,
            x_tolerance: 1e-10,
            target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub restarts: usize,
    /// Best objective value after each evaluation.
    pub history: Vec<f64>,
}

struct Tracker<'a, F> {
    space: &'a ParameterSpace,
    f: F,
    best_z: Vec<f64>,
    best_value: f64,
    history: Vec<f64>,
    budget: usize,
}

impl<F: FnMut(&[f64]) -> f64> Tracker<'_, F> {
    fn eval(&mut self, z: &[f64]) -> f64 {
        let z: Vec<f64> = z.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let value = (self.f)(&self.space.from_unit(&z));
        let value = if value.is_nan() { f64::INFINITY } else { value };
        if value < self.best_value {
            self.best_value = value;
            self.best_z = z;
        }
        self.history.push(self.best_value);
        value
    }

    fn exhausted(&self) -> bool {
        self.history.len() >= self.budget
    }
}

/// Minimise `objective` over the box of `space`. Deterministic for a
/// deterministic objective.
pub fn minimize(
    space: &ParameterSpace,
    objective: impl FnMut(&[f64]) -> f64,
    options: &SearchOptions,
) -> Result<SearchResult> {
    let v = space.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let n = space.len();
    let mut t = Tracker {
        space,
        f: objective,
        best_z: space.to_unit(&space.initial()),
        best_value: f64::INFINITY,
        history: Vec::new(),
        budget: options.budget,
    };
    let reached = |t: &Tracker<_>| options.target.is_some_and(|target| t.best_value <= target);

    let mut restarts = 0;
    loop {
        let start = t.best_z.clone();
        let mut simplex: Vec<Vec<f64>> = vec![start.clone()];
        for i in 0..n {
            let mut p = start.clone();
            p[i] += if p[i] + options.initial_step <= 1.0 {
                options.initial_step
            } else {
                -options.initial_step
            };
            simplex.push(p);
        }
        let mut values = Vec::with_capacity(n + 1);
        for p in &simplex {
            if t.exhausted() {
                break;
            }
            values.push(t.eval(p));
        }
        if values.len() == n + 1 {
            run_simplex(&mut t, &mut simplex, &mut values, options, &reached);
        }
        if t.exhausted() || reached(&t) || restarts >= options.max_restarts {
            break;
        }
        restarts += 1;
    }

    Ok(SearchResult {
        best: space.from_unit(&t.best_z),
        best_value: t.best_value,
        evaluations: t.history.len(),
        restarts,
        history: t.history,
    })
}

fn run_simplex<F: FnMut(&[f64]) -> f64>(
    t: &mut Tracker<F>,
    simplex: &mut [Vec<f64>],
    values: &mut [f64],
    options: &SearchOptions,
    reached: &impl Fn(&Tracker<F>) -> bool,
) {
    let n = simplex.len() - 1;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted_s: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let sorted_v: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex.clone_from_slice(&sorted_s);
        values.copy_from_slice(&sorted_v);

        if t.exhausted() || reached(t) {
            return;
        }
        let spread = values[n] - values[0];
        let extent = simplex[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let flat = spread.is_finite() && spread <= options.f_tolerance * (1.0 + values[0].abs());
        if (flat && extent <= options.x_tolerance.sqrt()) || extent <= options.x_tolerance {
            return;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |c: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(m, w)| (m + c * (m - w)).clamp(0.0, 1.0))
                .collect()
        };

        let xr = along(1.0);
        let fr = t.eval(&xr);
        if fr < values[0] {
            if t.exhausted() {
                simplex[n] = xr;
                values[n] = fr;
                continue;
            }
            let xe = along(2.0);
            let fe = t.eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        if t.exhausted() {
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(0.5);
            let fc = t.eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = t.eval(&xc);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        for i in 1..=n {
            if t.exhausted() {
                return;
            }
            let p: Vec<f64> = simplex[i]
                .iter()
                .zip(&simplex[0])
                .map(|(x, b)| b + 0.5 * (x - b))
                .collect();
            values[i] = t.eval(&p);
            simplex[i] = p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn plane(lo: f64, hi: f64) -> ParameterSpace {
        ParameterSpace::new(vec![
            Parameter::new("x", lo, hi, 0.0, Transform::Linear),
            Parameter::new("y", lo, hi, 0.0, Transform::Linear),
        ])
    }

    #[test]
    fn quadratic_bowl() {
        let r = minimize(
            &plane(-10.0, 10.0),
            |p| (p[0] - 3.0).powi(2) + (p[1] + 1.0).powi(2),
            &SearchOptions { budget: 200, max_restarts: 0, ..SearchOptions::default() },
        )
        .unwrap();
        assert!((r.best[0] - 3.0).abs() < 1e-6 && (r.best[1] + 1.0).abs() < 1e-6, "{r:?}");
        assert!(r.evaluations < 200);
    }

    #[test]
    fn optimum_on_the_boundary() {
        let r = minimize(&plane(-1.0, 1.0), |p| (p[0] - 3.0).powi(2) + p[1] * p[1], &SearchOptions::default()).unwrap();
        assert!((r.best[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn log_transform() {
        let space = ParameterSpace::new(vec![Parameter::new("k", 1e-3, 1e3, 1.0, Transform::Log)]);
        let r = minimize(&space, |p| (p[0].ln() - 42f64.ln()).powi(2), &SearchOptions::default()).unwrap();
        assert!((r.best[0] - 42.0).abs() < 1e-4);
    }

    #[test]
    fn rosenbrock_with_restarts() {
        let r = minimize(
            &plane(-2.0, 2.0),
            |p| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2),
            &SearchOptions { budget: 3000, ..SearchOptions::default() },
        )
        .unwrap();
        assert!(r.best_value < 1e-8, "{r:?}");
    }

    #[test]
    fn repeatable() {
        let f = |p: &[f64]| (p[0] - 0.3).abs() + (p[1] * 3.0).sin().abs();
        let a = minimize(&plane(-1.0, 1.0), f, &SearchOptions::default()).unwrap();
        let b = minimize(&plane(-1.0, 1.0), f, &SearchOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stops_at_target() {
        let r = minimize(
            &plane(-10.0, 10.0),
            |p| p[0] * p[0] + p[1] * p[1],
            &SearchOptions { target: Some(1e-2), ..SearchOptions::default() },
        )
        .unwrap();
        assert!(r.best_value <= 1e-2 && r.evaluations < 100);
    }

    #[test]
    fn invalid_spaces() {
        let bad = ParameterSpace::new(vec![
            Parameter::new("a", 1.0, 1.0, 1.0, Transform::Linear),
            Parameter::new("b", -1.0, 1.0, 0.5, Transform::Log),
            Parameter::new("c", 0.0, 1.0, 2.0, Transform::Linear),
        ]);
        assert_eq!(bad.violations().len(), 3);
        assert!(minimize(&bad, |_| 0.0, &SearchOptions::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn best_so_far_never_worsens(cx in -5.0f64..5.0, cy in -5.0f64..5.0, budget in 5usize..300) {
            let r = minimize(
                &plane(-10.0, 10.0),
                |p| (p[0] - cx).powi(2) + 3.0 * (p[1] - cy).powi(4) + (p[0] * p[1]).sin(),
                &SearchOptions { budget, ..SearchOptions::default() },
            ).unwrap();
            prop_assert!(r.evaluations <= budget);
            prop_assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
            prop_assert_eq!(*r.history.last().unwrap(), r.best_value);
        }
    }
}
