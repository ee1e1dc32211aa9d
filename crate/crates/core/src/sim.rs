//! Closed-loop simulation of the filtered system with fixed-step RK4.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{ensure_len, Error, Result};
use crate::filter::qp_filter;
use crate::synthesis::CbfCandidate;

/// Tolerance on `h(x₀)` below zero before a start is rejected.
pub const INITIAL_TOL: f64 = 1e-9;
/// Allowed excursion of `h` below zero from integration error.
pub const INVARIANCE_TOL: f64 = 1e-3;

/// Desired-input laws used as the nominal controller.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NominalController {
    Zero,
    /// `u[input] = kp (setpoint − x[position]) − kd x[velocity]`, other
    /// inputs zero.
    Pd {
        position: usize,
        velocity: usize,
        input: usize,
        setpoint: f64,
        kp: f64,
        kd: f64,
    },
    /// Planar quadrotor: thrust tracks a height, moment levels the body.
    QuadrotorHeight {
        mass: f64,
        inertia: f64,
        gravity: f64,
        height: f64,
        kp: f64,
        kd: f64,
    },
}

impl NominalController {
    pub fn eval(&self, x: &[f64], inputs: usize) -> Result<Vec<f64>> {
        let mut u = vec![0.0; inputs];
        match *self {
            NominalController::Zero => {}
            NominalController::Pd {
                position,
                velocity,
                input,
                setpoint,
                kp,
                kd,
            } => {
                if position >= x.len() || velocity >= x.len() || input >= inputs {
                    return Err(Error::InvalidParameter("PD controller index out of range".into()));
                }
                u[input] = kp * (setpoint - x[position]) - kd * x[velocity];
            }
            NominalController::QuadrotorHeight {
                mass,
                inertia,
                gravity,
                height,
                kp,
                kd,
            } => {
                ensure_len("quadrotor state", 6, x.len())?;
                ensure_len("quadrotor input", 2, inputs)?;
                u[0] = mass * (gravity + kp * (height - x[1]) - kd * x[4]);
                // the moment enters as θ̈ = −M/I
                u[1] = inertia * (kp * x[2] + kd * x[5]);
            }
        }
        Ok(u)
    }
}

/// A candidate, a nominal controller and an initial condition.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub cbf: CbfCandidate,
    pub nominal: NominalController,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub filter: bool,
}

impl Scenario {
    pub fn new(name: impl Into<String>, cbf: CbfCandidate, nominal: NominalController, x0: Vec<f64>) -> Self {
        Scenario {
            name: name.into(),
            cbf,
            nominal,
            x0,
            horizon: 10.0,
            dt: 1e-3,
            filter: true,
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt + 1e-9).floor() as usize
    }

    fn validate(&self) -> Result<()> {
        ensure_len("initial state", self.cbf.system().state_dim(), self.x0.len())?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be non-negative, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// One logged step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogRow {
    pub t: f64,
    pub state: Vec<f64>,
    pub u_desired: Vec<f64>,
    pub u_safe: Vec<f64>,
    pub h: f64,
    pub psi: f64,
    pub active: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrajectoryLog {
    pub state_dim: usize,
    pub input_dim: usize,
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((1..=self.state_dim).map(|i| format!("x{i}")));
        h.extend((1..=self.input_dim).map(|i| format!("u_des{i}")));
        h.extend((1..=self.input_dim).map(|i| format!("u_safe{i}")));
        h.extend(["h", "psi", "active"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in &self.rows {
            let mut rec: Vec<String> = Vec::with_capacity(self.state_dim + 2 * self.input_dim + 4);
            rec.push(r.t.to_string());
            rec.extend(r.state.iter().chain(&r.u_desired).chain(&r.u_safe).map(f64::to_string));
            rec.push(r.h.to_string());
            rec.push(r.psi.to_string());
            rec.push(if r.active { "1" } else { "0" }.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        self.rows.last().map(|r| r.state.as_slice())
    }
}

fn rk4_step<F>(x: &[f64], dt: f64, mut field: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let shift = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> { a.iter().zip(k).map(|(a, k)| a + s * k).collect() };
    let k1 = field(x)?;
    let k2 = field(&shift(x, &k1, 0.5 * dt))?;
    let k3 = field(&shift(x, &k2, 0.5 * dt))?;
    let k4 = field(&shift(x, &k3, dt))?;
    Ok((0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Integrates `ẋ = f(x) + g(x) u(x)` with the filter applied at every RK4
/// stage and logs every step.
pub fn simulate(scenario: &Scenario) -> Result<TrajectoryLog> {
    scenario.validate()?;
    let cbf = &scenario.cbf;
    let sys = cbf.system();
    let m = sys.input_dim();
    let alpha = cbf.alpha();

    let h0 = cbf.h(&scenario.x0)?;
    if h0 < -INITIAL_TOL {
        return Err(Error::InitialStateUnsafe { h: h0 });
    }

    let control = |x: &[f64]| -> Result<(Vec<f64>, Vec<f64>, bool)> {
        let ud = scenario.nominal.eval(x, m)?;
        if scenario.filter {
            let d = qp_filter(cbf, x, &ud, alpha)?;
            Ok((d.u_desired, d.u_safe, d.active))
        } else {
            Ok((ud.clone(), ud, false))
        }
    };

    let steps = scenario.steps();
    let mut log = TrajectoryLog {
        state_dim: sys.state_dim(),
        input_dim: m,
        rows: Vec::with_capacity(steps + 1),
    };
    let mut x = scenario.x0.clone();
    for step in 0..=steps {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step });
        }
        let (u_desired, u_safe, active) = control(&x)?;
        log.rows.push(LogRow {
            t: step as f64 * scenario.dt,
            state: x.clone(),
            u_desired,
            u_safe: u_safe.clone(),
            h: cbf.h(&x)?,
            psi: cbf.psi(&x)?,
            active,
        });
        if step == steps {
            break;
        }
        let mut first = Some(u_safe);
        x = rk4_step(&x, scenario.dt, |s| {
            let u = match first.take() {
                Some(u) => u,
                None => control(s)?.1,
            };
            sys.field(s, &u)
        })
        .map_err(|e| match e {
            Error::NonFiniteValue { .. } => Error::NonFiniteState { step: step + 1 },
            other => other,
        })?;
    }
    Ok(log)
}

/// Summary statistics of a logged run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub steps: usize,
    pub min_h: f64,
    pub min_psi: f64,
    /// `max(0, −min ψ)`.
    pub max_violation: f64,
    /// `max(0, −min h)`.
    pub max_undershoot: f64,
    /// Largest `h − ψ` over the log; non-positive when `𝒮 ⊂ 𝒞` holds.
    pub max_h_minus_psi: f64,
    pub active_fraction: f64,
    pub final_state: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn invariance_report(log: &TrajectoryLog) -> InvarianceReport {
    let n = log.rows.len();
    let min_h = log.rows.iter().map(|r| r.h).fold(f64::INFINITY, f64::min);
    let min_psi = log.rows.iter().map(|r| r.psi).fold(f64::INFINITY, f64::min);
    let max_gap = log
        .rows
        .iter()
        .map(|r| r.h - r.psi)
        .fold(f64::NEG_INFINITY, f64::max);
    let active = log.rows.iter().filter(|r| r.active).count();
    let passed = n > 0
        && min_h >= -INVARIANCE_TOL
        && min_psi >= -INVARIANCE_TOL
        && max_gap <= 1e-12;
    InvarianceReport {
        steps: n,
        min_h,
        min_psi,
        max_violation: (-min_psi).max(0.0),
        max_undershoot: (-min_h).max(0.0),
        max_h_minus_psi: max_gap,
        active_fraction: if n == 0 { 0.0 } else { active as f64 / n as f64 },
        final_state: log.final_state().map(<[f64]>::to_vec).unwrap_or_default(),
        tolerance: INVARIANCE_TOL,
        passed,
    }
}

/// Matplotlib script that plots a trajectory CSV.
pub fn plot_script(csv_name: &str, log: &TrajectoryLog) -> String {
    let states: Vec<String> = (1..=log.state_dim).map(|i| format!("\"x{i}\"")).collect();
    let inputs: Vec<String> = (1..=log.input_dim).map(|i| format!("{i}")).collect();
    format!(
        r#"import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv_name}"
with open(path) as f:
    rows = list(csv.DictReader(f))
col = lambda k: [float(r[k]) for r in rows]
t = col("t")

fig, ax = plt.subplots(3, 1, sharex=True, figsize=(8, 9))
for k in [{states}]:
    ax[0].plot(t, col(k), label=k)
ax[0].set_ylabel("state")
ax[0].legend()
for i in [{inputs}]:
    ax[1].plot(t, col(f"u_des{{i}}"), "--", label=f"u_des{{i}}")
    ax[1].plot(t, col(f"u_safe{{i}}"), label=f"u_safe{{i}}")
ax[1].set_ylabel("input")
ax[1].legend()
ax[2].plot(t, col("h"), label="h")
ax[2].plot(t, col("psi"), label="psi")
ax[2].axhline(0.0, color="k", lw=0.5)
ax[2].set_ylabel("barrier")
ax[2].set_xlabel("t [s]")
ax[2].legend()
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"#,
        states = states.join(", "),
        inputs = inputs.join(", "),
    )
}

pub fn write_plot_script(path: &Path, csv_name: &str, log: &TrajectoryLog) -> Result<()> {
    std::fs::write(path, plot_script(csv_name, log))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_integrates_exponential() {
        let mut x = vec![1.0];
        for _ in 0..100 {
            x = rk4_step(&x, 0.01, |s| Ok(vec![-s[0]])).unwrap();
        }
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn pd_and_hover() {
        let pd = NominalController::Pd {
            position: 0,
            velocity: 2,
            input: 0,
            setpoint: 1.5,
            kp: 5.0,
            kd: 2.0,
        };
        assert_eq!(pd.eval(&[1.0, 0.0, 0.5, 0.0], 1).unwrap(), vec![1.5]);
        let hover = NominalController::QuadrotorHeight {
            mass: 1.0,
            inertia: 0.01,
            gravity: 9.81,
            height: 2.0,
            kp: 5.0,
            kd: 2.0,
        };
        assert_eq!(hover.eval(&[0.0, 2.0, 0.0, 0.0, 0.0, 0.0], 2).unwrap(), vec![9.81, 0.0]);
    }
}
