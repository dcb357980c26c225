use crate::ml::ClassifierReport;
use crate::tsa::{Quantity, RunReport};
use std::io::Write;

/// A labelled run report, e.g. the disaggregated or aggregated stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub stage: String,
    pub report: RunReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub k: usize,
    pub report: RunReport,
}

/// One row per quantity and stage, with error in percent (or absolute on a
/// zero base), then period counts and the work-based speed-up.
pub fn write_report(case: &str, mode: &str, stages: &[StageReport], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["case", "mode", "stage", "quantity", "full", "aggregated", "error", "unit", "denominator_zero"])?;
    for s in stages {
        let r = &s.report;
        for e in &r.errors {
            let unit = if e.denominator_zero {
                if e.quantity == Quantity::Ofv {
                    "EUR"
                } else {
                    "MWh"
                }
            } else {
                "%"
            };
            w.write_record([
                case,
                mode,
                &s.stage,
                &e.quantity.to_string(),
                &format!("{:.6}", e.full),
                &format!("{:.6}", e.agg),
                &format!("{:.6}", e.error),
                unit,
                &e.denominator_zero.to_string(),
            ])?;
        }
        w.write_record([
            case,
            mode,
            &s.stage,
            "Periods",
            "",
            &r.periods_total.to_string(),
            "",
            "count",
            "",
        ])?;
        w.write_record([
            case,
            mode,
            &s.stage,
            "Max. Speed-up",
            &format!("{:.0}", r.work_full),
            &format!("{:.0}", r.work_parallel_bound),
            &format!("{:.6}", r.speedup),
            "p.u. (iterations x rows)",
            "",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Error of each quantity against cluster count; `zero_denominator` lists the
/// quantities reported as absolute differences.
pub fn write_error_sweep(points: &[SweepPoint], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["CL".to_string()];
    header.extend(Quantity::ALL.iter().map(|q| q.label().to_string()));
    header.push("zero_denominator".into());
    w.write_record(&header)?;
    for p in points {
        let mut rec = vec![p.k.to_string()];
        rec.extend(Quantity::ALL.iter().map(|&q| format!("{:.6}", p.report.error(q).error)));
        let zero: Vec<&str> = p
            .report
            .errors
            .iter()
            .filter(|e| e.denominator_zero)
            .map(|e| e.quantity.label())
            .collect();
        rec.push(zero.join(";"));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_speedup_sweep(points: &[SweepPoint], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["CL", "periods_total", "work_full", "work_parallel_bound", "speedup"])?;
    for p in points {
        let r = &p.report;
        w.write_record([
            p.k.to_string(),
            r.periods_total.to_string(),
            format!("{:.0}", r.work_full),
            format!("{:.0}", r.work_parallel_bound),
            format!("{:.6}", r.speedup),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_classifier(rows: &[(&str, ClassifierReport)], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["set", "tp", "fn", "fp", "tn", "accuracy", "balanced_accuracy"])?;
    for (name, r) in rows {
        w.write_record([
            name.to_string(),
            r.tp.to_string(),
            r.fn_.to_string(),
            r.fp.to_string(),
            r.tn.to_string(),
            format!("{:.6}", r.accuracy),
            format!("{:.6}", r.balanced_accuracy),
        ])?;
    }
    w.flush()?;
    Ok(())
}
