//! Print-oriented HTML rendering of a single questionnaire.

use std::fmt::Write;

use teval_core::results::{PrintableReport, ReportLine};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn group(out: &mut String, heading: &str, lines: &[ReportLine]) {
    let _ = write!(
        out,
        "<section><h2>{}</h2><table><thead><tr><th>Nr. enunț</th><th>Răspunsul oferit</th></tr></thead><tbody>",
        escape(heading)
    );
    for line in lines {
        let _ = write!(
            out,
            "<tr><td title=\"{}\">{}</td><td>{}</td></tr>",
            escape(&line.text),
            line.index,
            escape(&line.rendered)
        );
    }
    out.push_str("</tbody></table></section>");
}

pub fn render(report: &PrintableReport) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html><html lang=\"ro\"><head><meta charset=\"utf-8\">");
    let _ = write!(out, "<title>Chestionar nr. {}</title>", report.questionnaire_no);
    out.push_str(
        "<style>body{font-family:serif;margin:2em}table{border-collapse:collapse;margin-bottom:1em}\
         td,th{border:1px solid #444;padding:2px 8px}section{display:inline-block;vertical-align:top;margin-right:2em}\
         @media print{body{margin:0}}</style></head><body>",
    );
    let _ = write!(out, "<p>Chestionar nr.: {}", report.questionnaire_no);
    if report.demo {
        out.push_str(" (DEMO)");
    }
    out.push_str("</p>");
    let _ = write!(out, "<p>Cadru didactic evaluat: {}</p>", escape(&report.teacher_display_name));
    let _ = write!(out, "<p>Data evaluării: {}</p>", report.completed_at.format("%Y-%m-%d %H:%M UTC"));
    group(&mut out, "Întrebări cu cotare directă", &report.direct);
    group(&mut out, "Întrebări cu cotare inversă", &report.inverse);
    out.push_str("</body></html>\n");
    out
}
