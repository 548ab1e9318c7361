use super::{ExperimentError, GridReport, Result, TableStyle};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedTable {
    pub text: String,
    pub csv: String,
}

/// `1.336` → `"1.336%"`.
pub fn format_mape(mape: f64) -> String {
    format!("{mape:.3}%")
}

fn format_r2(r2: Option<f64>) -> String {
    r2.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"))
}

fn format_share(fraction: f64) -> String {
    format!("{:.1}%", 100.0 * fraction)
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(fields).expect("write to memory");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
}

fn text_table(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|j| rows.iter().map(|r| r[j].chars().count()).chain([header[j].chars().count()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(j, (c, w))| if j == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

/// Renders mean-over-seeds results in the given style.
pub fn render_table(report: &GridReport, style: TableStyle) -> Result<RenderedTable> {
    let missing: Vec<String> = report.rows.iter().filter(|r| r.aggregate.is_none()).map(|r| r.name.clone()).collect();
    if !missing.is_empty() || report.rows.is_empty() {
        return Err(ExperimentError::MissingRows(missing));
    }
    let (mut text_rows, mut csv) = (Vec::new(), String::new());
    let header: Vec<String>;
    match style {
        TableStyle::Table1 | TableStyle::Table2 => {
            let detail = if style == TableStyle::Table1 { "model" } else { "features" };
            header = ["row", detail, "MAPE", "R2", "best MAPE", "seeds"].map(String::from).to_vec();
            csv.push_str(&csv_line(&["row", detail, "mape_pct", "r2", "best_mape_pct", "seeds_ok"].map(String::from)));
            for r in &report.rows {
                let a = r.aggregate.as_ref().expect("checked above");
                let detail = if style == TableStyle::Table1 { r.model.name().to_string() } else { r.features.clone() };
                text_rows.push(vec![
                    r.name.clone(),
                    detail.clone(),
                    format_mape(a.mean_mape),
                    format_r2(a.mean_r2),
                    format_mape(a.best_mape),
                    format!("{}/{}", a.seeds_ok, r.seeds.len()),
                ]);
                csv.push_str(&csv_line(&[
                    r.name.clone(),
                    detail,
                    format!("{:.3}", a.mean_mape),
                    format_r2(a.mean_r2),
                    format!("{:.3}", a.best_mape),
                    a.seeds_ok.to_string(),
                ]));
            }
        }
        TableStyle::Table5 => {
            header = ["row", "1%", "2%", "3%", "4%", "5%", "MAPE"].map(String::from).to_vec();
            csv.push_str(&csv_line(
                &["row", "acc_1pct", "acc_2pct", "acc_3pct", "acc_4pct", "acc_5pct", "mape_pct"].map(String::from),
            ));
            for r in &report.rows {
                let a = r.aggregate.as_ref().expect("checked above");
                let mut cells = vec![r.name.clone()];
                cells.extend(a.mean_tolerance_accuracy.iter().map(|&f| format_share(f)));
                cells.push(format_mape(a.mean_mape));
                text_rows.push(cells);
                let mut fields = vec![r.name.clone()];
                fields.extend(a.mean_tolerance_accuracy.iter().map(|f| format!("{:.3}", 100.0 * f)));
                fields.push(format!("{:.3}", a.mean_mape));
                csv.push_str(&csv_line(&fields));
            }
        }
    }
    let mut text = format!("{} (mean over seeds {:?}, {} test windows)\n\n", report.grid.name, report.grid.seeds, report.test_origins);
    text.push_str(&text_table(&header, &text_rows));
    text.push_str(&format!(
        "\npersistence benchmark: MAPE {}, R2 {}\n",
        format_mape(report.benchmark.mape),
        format_r2(report.benchmark.r2)
    ));
    Ok(RenderedTable { text, csv })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::experiments::{builtin_grid, Aggregate, Provenance, RowResult, RunSummary, SeedOutcome};
    use crate::models::ModelKind;

    fn summary(mape: f64) -> RunSummary {
        RunSummary {
            mape,
            r2: Some(0.9),
            tolerance_accuracy: vec![0.2, 0.4, 0.6, 0.7, 0.8],
            test_samples: 10,
            epochs: 3,
        }
    }

    fn report(grid: &str, failed_row: Option<usize>) -> GridReport {
        let grid = builtin_grid(grid).unwrap();
        let rows = grid
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let (seeds, aggregate) = if Some(i) == failed_row {
                    let seeds = BTreeMap::from([(0, SeedOutcome::Failed { code: "E_X".into(), message: "boom".into() })]);
                    (seeds, None)
                } else {
                    let seeds = BTreeMap::from([(0, SeedOutcome::Ok(summary(1.336)))]);
                    let aggregate = Aggregate {
                        seeds_ok: 1,
                        mean_mape: 1.336,
                        best_mape: 1.336,
                        mean_r2: Some(0.9),
                        mean_tolerance_accuracy: vec![0.2, 0.4, 0.6, 0.7, 0.8],
                    };
                    (seeds, Some(aggregate))
                };
                RowResult {
                    name: r.name.clone(),
                    features: r.selector.label(),
                    model: r.spec.kind,
                    channels: r.selector.channel_count(),
                    seeds,
                    aggregate,
                }
            })
            .collect();
        GridReport {
            grid,
            provenance: Provenance {
                config_hash: String::new(),
                data_hash: String::new(),
                code_version: String::new(),
            },
            benchmark: summary(7.0),
            test_origins: 10,
            rows,
        }
    }

    #[test]
    fn mape_has_three_decimals() {
        assert_eq!(format_mape(1.336), "1.336%");
        assert_eq!(format_mape(2.0), "2.000%");
        assert_eq!(format_mape(0.12345), "0.123%");
    }

    #[test]
    fn csv_has_one_line_per_row_plus_header() {
        for (name, style) in [("table1", TableStyle::Table1), ("table2", TableStyle::Table2), ("table5", TableStyle::Table5)] {
            let r = report(name, None);
            let t = render_table(&r, style).unwrap();
            assert_eq!(t.csv.lines().count(), r.rows.len() + 1, "{name}");
            assert!(t.text.contains("1.336%"), "{name}");
        }
    }

    #[test]
    fn table1_cells() {
        let t = render_table(&report("table1", None), TableStyle::Table1).unwrap();
        let lines: Vec<&str> = t.csv.lines().collect();
        assert_eq!(lines[0], "row,model,mape_pct,r2,best_mape_pct,seeds_ok");
        assert_eq!(lines[3], "lstm,lstm,1.336,0.900,1.336,1");
        assert!(t.text.contains("persistence benchmark: MAPE 7.000%"));
    }

    #[test]
    fn table5_cells() {
        let t = render_table(&report("table5", None), TableStyle::Table5).unwrap();
        let lines: Vec<&str> = t.csv.lines().collect();
        assert_eq!(lines[0], "row,acc_1pct,acc_2pct,acc_3pct,acc_4pct,acc_5pct,mape_pct");
        assert_eq!(lines[1], "all,20.000,40.000,60.000,70.000,80.000,1.336");
        assert!(t.text.contains("80.0%"));
    }

    #[test]
    fn rows_without_results_are_missing() {
        let err = render_table(&report("table1", Some(2)), TableStyle::Table1).unwrap_err();
        assert!(matches!(&err, ExperimentError::MissingRows(rows) if rows == &["lstm".to_string()]));
        assert_eq!(err.code(), "E_MISSING_ROWS");
        let mut empty = report("table1", None);
        empty.rows.clear();
        assert!(matches!(render_table(&empty, TableStyle::Table1), Err(ExperimentError::MissingRows(_))));
    }

    #[test]
    fn rendering_is_deterministic() {
        let r = report("table2", None);
        assert_eq!(render_table(&r, TableStyle::Table2).unwrap(), render_table(&r, TableStyle::Table2).unwrap());
        assert_eq!(r.rows[0].model, ModelKind::Lstm);
    }
}
