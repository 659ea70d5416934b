//! CSV serialization of iteration and simulation traces.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which round-trips
//! every `f64` exactly.

use std::io::{self, Write};

use crate::dispatch::IterationTrace;
use crate::dynamics::SimulationTrace;
use crate::experiments::SweepRow;
use crate::model::Scenario;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Columns: `k, lambda, p_1..p_N, imbalance, delta_f`.
pub fn write_iteration_csv<W: Write>(trace: &IterationTrace, n_generators: usize, sink: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["k".to_string(), "lambda".to_string()];
    header.extend((1..=n_generators).map(|i| format!("p_{i}")));
    header.extend(["imbalance".to_string(), "delta_f".to_string()]);
    w.write_record(&header)?;
    for st in &trace.states {
        let mut row = vec![st.k.to_string(), fmt_f64(st.lambda)];
        row.extend(st.p.iter().map(|&p| fmt_f64(p)));
        row.push(fmt_f64(st.imbalance));
        row.push(fmt_f64(st.delta_f));
        w.write_record(&row)?;
    }
    w.flush()
}

/// Columns: `t, p_1..p_N, delta_f, marginal_cost_1..N`.
pub fn write_simulation_csv<W: Write>(trace: &SimulationTrace, s: &Scenario, sink: W) -> io::Result<()> {
    let n = s.n_generators();
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("p_{i}")));
    header.push("delta_f".to_string());
    header.extend((1..=n).map(|i| format!("marginal_cost_{i}")));
    w.write_record(&header)?;
    for st in &trace.samples {
        let mut row = vec![fmt_f64(st.t)];
        row.extend(st.p.iter().map(|&p| fmt_f64(p)));
        row.push(fmt_f64(st.delta_f));
        row.extend(s.marginal_costs(&st.p).into_iter().map(fmt_f64));
        w.write_record(&row)?;
    }
    w.flush()
}

/// One row per sweep value; empty cells where a value failed or a metric is undefined.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], sink: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "value",
        "dual_step",
        "dual_iterations",
        "dual_stop",
        "dual_empirical_ratio",
        "dual_predicted_ratio",
        "mom_step",
        "mom_iterations",
        "mom_stop",
        "mom_empirical_ratio",
        "mom_predicted_ratio",
        "integral_settling",
        "pi_settling",
        "error",
    ])?;
    for row in rows {
        let mut rec = vec![fmt_f64(row.value)];
        match &row.report {
            Some(r) => {
                for m in [&r.dual, &r.mom] {
                    rec.push(fmt_f64(m.step));
                    rec.push(m.iterations.to_string());
                    rec.push(format!("{:?}", m.stop_reason));
                    rec.push(fmt_opt(m.empirical_ratio));
                    rec.push(fmt_f64(m.predicted_ratio));
                }
                rec.push(fmt_opt(r.integral_settling));
                rec.push(fmt_opt(r.pi_settling));
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 12)),
        }
        rec.push(row.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()
}
