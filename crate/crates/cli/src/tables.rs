//! CSV exports of report tables. Numbers carry the report precision;
//! trajectories use [`gridshape_core::StepResponse::write_csv`].

use std::io::Write;

use gridshape_core::api::{AnalysisReport, LocusReport};
use gridshape_core::report::{round_sig, SIGNIFICANT_DIGITS};
use gridshape_core::FrontierPoint;

pub type Table = (Vec<String>, Vec<Vec<String>>);

fn num(x: f64) -> String {
    let r = round_sig(x, SIGNIFICANT_DIGITS);
    if r == 0.0 {
        "0".into()
    } else {
        r.to_string()
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

pub fn modes(a: &AnalysisReport) -> Table {
    let rows = a
        .per_mode
        .iter()
        .map(|m| {
            vec![
                m.k.to_string(),
                num(m.lambda_k),
                num(m.damping),
                num(m.decay),
            ]
        })
        .collect();
    (header(&["k", "lambda_k", "damping", "decay"]), rows)
}

pub fn locus(l: &LocusReport) -> Table {
    let rows = l
        .branches
        .iter()
        .flat_map(|b| {
            b.points
                .iter()
                .map(move |p| vec![b.branch_id.to_string(), num(p.gain), num(p.re), num(p.im)])
        })
        .collect();
    (header(&["branch", "gain", "re", "im"]), rows)
}

pub fn frontier(points: &[FrontierPoint]) -> Table {
    let rows = points
        .iter()
        .map(|p| {
            let segment = serde_json::to_value(p.segment)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            vec![num(p.d_b), num(p.cos_psi), num(p.alpha), segment]
        })
        .collect();
    (header(&["d_b", "cos_psi", "alpha", "segment"]), rows)
}

pub fn write<W: Write>(out: W, table: &Table) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.0)?;
    for row in &table.1 {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_are_rounded_and_zero_is_unsigned() {
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(1.0 / 3.0), "0.333333333333");
        assert_eq!(num(35.89), "35.89");
    }

    #[test]
    fn frontier_table_layout() {
        let p = FrontierPoint {
            cos_psi: 0.1,
            alpha: 0.2,
            d_b: 1.0 / 3.0,
            segment: gridshape_core::tuning::FrontierSegment::Linear,
        };
        let (cols, rows) = frontier(&[p]);
        assert_eq!(cols, ["d_b", "cos_psi", "alpha", "segment"]);
        assert_eq!(rows[0][0], "0.333333333333");
        let mut buf = Vec::new();
        write(&mut buf, &(cols, rows)).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("d_b,cos_psi,alpha,segment\n"));
    }
}
