//! Grid sweeps over a gap query, written as CSV one row at a time.

use crate::query::{optimize, RunConfig};
use serde_json::{Map, Value as Json};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use virelay::rational::{self, Rat};
use virelay::smt::RatioStatus;
use virelay::{Error, Result, Solver};

/// Every top-level array in `params` is an axis. Points enumerate the axes
/// in key order, the last key varying fastest.
pub fn grid(params: &Json) -> Result<(Vec<String>, Vec<Json>)> {
    let obj = params.as_object().ok_or_else(|| Error::config("params must be a JSON object"))?;
    let axes: Vec<(&String, &Vec<Json>)> = obj.iter().filter_map(|(k, v)| v.as_array().map(|a| (k, a))).collect();
    if axes.iter().any(|(_, a)| a.is_empty()) {
        return Err(Error::config("grid axes must not be empty"));
    }
    let mut points = vec![obj.clone()];
    for (key, values) in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut p: Map<String, Json> = p.clone();
                    p.insert((*key).clone(), v.clone());
                    p
                })
            })
            .collect();
    }
    Ok((axes.iter().map(|(k, _)| (*k).clone()).collect(), points.into_iter().map(Json::Object).collect()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub values: Vec<String>,
    pub bound: Option<Rat>,
    pub status: String,
    pub wall_time: f64,
}

fn cell(v: &Json) -> String {
    match v {
        Json::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn is_config(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::Json(_) | Error::Field { .. } | Error::Unsupported(_))
}

fn run_point(base: &RunConfig, axes: &[String], point: Json, solver: &Solver, tol: &Rat) -> SweepRow {
    let values = axes.iter().map(|k| cell(&point[k.as_str()])).collect();
    let rc = RunConfig { model: base.model, query: base.query.clone(), params: point };
    match optimize(&rc, solver, tol) {
        Ok(r) => SweepRow {
            values,
            bound: match &r.status {
                RatioStatus::Inconclusive { last_sat, .. } => Some(last_sat.clone()),
                _ => Some(r.bound),
            },
            status: r.status.label().into(),
            wall_time: r.wall_time,
        },
        Err(e) => {
            eprintln!("sweep point failed: {e}");
            SweepRow { values, bound: None, status: if is_config(&e) { "config_error" } else { "error" }.into(), wall_time: 0.0 }
        }
    }
}

/// Runs every grid point on up to `jobs` threads and writes rows to `out`
/// in grid order, flushing after each. Returns all rows.
pub fn sweep<W: Write>(base: &RunConfig, solver: &Solver, tol: &Rat, jobs: usize, out: W) -> Result<Vec<SweepRow>> {
    let (axes, points) = grid(&base.params)?;
    let mut csv = csv::Writer::from_writer(out);
    let header: Vec<String> =
        axes.iter().cloned().chain(["bound", "bound_decimal", "status", "wall_time"].map(String::from)).collect();
    csv.write_record(&header).map_err(csv_err)?;
    csv.flush()?;

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, SweepRow)>();
    let mut rows: Vec<Option<SweepRow>> = vec![None; points.len()];
    let mut written = 0;
    std::thread::scope(|s| -> Result<()> {
        for _ in 0..jobs.clamp(1, points.len().max(1)) {
            let tx = tx.clone();
            let (next, points, axes) = (&next, &points, &axes);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= points.len() {
                    break;
                }
                let row = run_point(base, axes, points[i].clone(), solver, tol);
                if tx.send((i, row)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, row) in rx {
            rows[i] = Some(row);
            while written < rows.len() {
                let Some(r) = &rows[written] else { break };
                let bound = r.bound.as_ref();
                let mut rec = r.values.clone();
                rec.push(bound.map(rational::to_exact).unwrap_or_default());
                rec.push(bound.map(|b| rational::to_decimal(b, 6)).unwrap_or_default());
                rec.push(r.status.clone());
                rec.push(format!("{:.3}", r.wall_time));
                csv.write_record(&rec).map_err(csv_err)?;
                csv.flush()?;
                written += 1;
            }
        }
        Ok(())
    })?;
    Ok(rows.into_iter().map(|r| r.expect("every point reported")).collect())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_orders_last_axis_fastest() {
        let (axes, pts) = grid(&serde_json::json!({"a": [1, 2], "b": ["x", "y"], "c": 7})).unwrap();
        assert_eq!(axes, vec!["a", "b"]);
        let seen: Vec<(i64, String)> =
            pts.iter().map(|p| (p["a"].as_i64().unwrap(), p["b"].as_str().unwrap().to_string())).collect();
        assert_eq!(seen, vec![(1, "x".into()), (1, "y".into()), (2, "x".into()), (2, "y".into())]);
        assert!(pts.iter().all(|p| p["c"] == 7));
    }

    #[test]
    fn scalar_params_make_one_point() {
        let (axes, pts) = grid(&serde_json::json!({"a": 1})).unwrap();
        assert!(axes.is_empty());
        assert_eq!(pts.len(), 1);
    }

    #[test]
    fn empty_axis_is_rejected() {
        assert!(grid(&serde_json::json!({"a": []})).is_err());
    }
}
