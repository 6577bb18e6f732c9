//! Item scoring, per-teacher result tables and the printable questionnaire.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::QuestionBank;
use crate::model::{AnswerValue, Direction, SessionMode, TeacherId, Timestamp};
use crate::store::{ResultRecord, Store};

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("questionnaire {0} not found")]
    NotFound(u64),
    #[error("questionnaire {0} is not finished")]
    Incomplete(u64),
}

/// Direct items keep their value; inverse items are reverse coded on the
/// 1..=5 scale.
pub fn score_item(raw: AnswerValue, direction: Direction) -> u8 {
    match direction {
        Direction::Direct => raw.raw(),
        Direction::Inverse => 6 - raw.raw(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRow {
    pub questionnaire_no: u64,
    pub demo: bool,
    pub completed_at: Timestamp,
    pub teacher_id: TeacherId,
    pub teacher_display_name: String,
    /// e1..eN as answered.
    pub raw_answers: Vec<u8>,
    /// e1..eN after direction adjustment.
    pub scored_answers: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportLine {
    pub index: u32,
    pub text: String,
    pub answer: AnswerValue,
    /// `"5 - foarte mult"`
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrintableReport {
    pub questionnaire_no: u64,
    pub demo: bool,
    pub teacher_display_name: String,
    pub completed_at: Timestamp,
    pub direct: Vec<ReportLine>,
    pub inverse: Vec<ReportLine>,
}

fn direction_of(bank: &QuestionBank, index: u32) -> Direction {
    bank.direction(index).unwrap_or(Direction::Direct)
}

fn to_row(record: ResultRecord, bank: &QuestionBank) -> Option<ResultRow> {
    let (Some(questionnaire_no), Some(completed_at)) = (record.questionnaire_no, record.completed_at) else {
        return None;
    };
    let scored_answers =
        record.answers.iter().zip(1u32..).map(|(v, i)| score_item(*v, direction_of(bank, i))).collect();
    Some(ResultRow {
        questionnaire_no,
        demo: record.mode == SessionMode::Demo,
        completed_at,
        teacher_id: record.teacher.id,
        teacher_display_name: record.teacher.display_name,
        raw_answers: record.answers.iter().map(|v| v.raw()).collect(),
        scored_answers,
    })
}

/// Completed questionnaires, newest first.
pub fn list_results(
    store: &Store,
    bank: &QuestionBank,
    teacher: Option<&TeacherId>,
    include_demo: bool,
) -> Vec<ResultRow> {
    store.snapshot_results(teacher, include_demo, false).into_iter().filter_map(|r| to_row(r, bank)).collect()
}

pub fn printable_report(
    store: &Store,
    bank: &QuestionBank,
    questionnaire_no: u64,
) -> Result<PrintableReport, ResultsError> {
    let record = store.result_by_number(questionnaire_no).ok_or(ResultsError::NotFound(questionnaire_no))?;
    let completed_at = record.completed_at.ok_or(ResultsError::Incomplete(questionnaire_no))?;
    let mut direct = Vec::new();
    let mut inverse = Vec::new();
    for (answer, index) in record.answers.iter().zip(1u32..) {
        let question = bank.get(index);
        let line = ReportLine {
            index,
            text: question.map(|q| q.text.clone()).unwrap_or_default(),
            answer: *answer,
            rendered: answer.to_string(),
        };
        match direction_of(bank, index) {
            Direction::Direct => direct.push(line),
            Direction::Inverse => inverse.push(line),
        }
    }
    Ok(PrintableReport {
        questionnaire_no,
        demo: record.mode == SessionMode::Demo,
        teacher_display_name: record.teacher.display_name,
        completed_at,
        direct,
        inverse,
    })
}

/// Writes rows as a comma-separated table:
/// `questionnaire_no,demo,completed_at,teacher_id,teacher,e1..eN`.
/// Answer columns hold the raw values, or the direction-adjusted ones when
/// `scored` is set.
pub fn write_table<W: Write>(rows: &[ResultRow], scored: bool, out: W) -> Result<(), csv::Error> {
    let width = rows.iter().map(|r| r.raw_answers.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> =
        ["questionnaire_no", "demo", "completed_at", "teacher_id", "teacher"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=width).map(|i| format!("e{i}")));
    w.write_record(&header)?;
    for row in rows {
        let answers = if scored { &row.scored_answers } else { &row.raw_answers };
        let mut rec = vec![
            row.questionnaire_no.to_string(),
            if row.demo { "DEMO".into() } else { String::new() },
            row.completed_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            row.teacher_id.to_string(),
            row.teacher_display_name.clone(),
        ];
        rec.extend(answers.iter().map(|a| a.to_string()));
        rec.resize(5 + width, String::new());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
