//! Question bank loading and validation.
//!
//! The bank file is a JSON array of `{index, text, direction}` records.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Direction, Question};

/// The 58-item sample bank shipped with the crate.
pub const SAMPLE_BANK_JSON: &str = include_str!("../data/questions.json");

#[derive(Debug, Error)]
pub enum BankError {
    #[error("question {0} is missing")]
    BankGap(u32),
    #[error("question {0} appears more than once")]
    BankDuplicate(u32),
    #[error("question {0} has empty text")]
    BankEmptyText(u32),
    #[error("question index {index} is outside 1..={expected}")]
    BankOutOfRange { index: u32, expected: usize },
    #[error("bank has {found} questions, expected {expected}")]
    BankLength { found: usize, expected: usize },
    #[error("question bank is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read question bank: {0}")]
    Io(#[from] std::io::Error),
}

/// A validated bank: `items[i].index == i + 1` for every position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuestionBank {
    items: Vec<Question>,
}

pub fn validate_question_bank(mut items: Vec<Question>, n_expected: usize) -> Result<QuestionBank, BankError> {
    let mut seen = vec![false; n_expected];
    for q in &items {
        if q.index == 0 || q.index as usize > n_expected {
            return Err(BankError::BankOutOfRange { index: q.index, expected: n_expected });
        }
        let slot = &mut seen[q.index as usize - 1];
        if *slot {
            return Err(BankError::BankDuplicate(q.index));
        }
        *slot = true;
        if q.text.trim().is_empty() {
            return Err(BankError::BankEmptyText(q.index));
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(BankError::BankGap(missing as u32 + 1));
    }
    items.sort_by_key(|q| q.index);
    Ok(QuestionBank { items })
}

impl QuestionBank {
    pub fn from_json(json: &str, n_expected: usize) -> Result<QuestionBank, BankError> {
        let items: Vec<Question> = serde_json::from_str(json)?;
        if items.len() != n_expected {
            // Report the precise fault where possible, fall back to a length mismatch.
            validate_question_bank(items.clone(), n_expected)?;
            return Err(BankError::BankLength { found: items.len(), expected: n_expected });
        }
        validate_question_bank(items, n_expected)
    }

    pub fn from_file(path: &Path, n_expected: usize) -> Result<QuestionBank, BankError> {
        let json = std::fs::read_to_string(path)?;
        QuestionBank::from_json(&json, n_expected)
    }

    pub fn sample() -> QuestionBank {
        QuestionBank::from_json(SAMPLE_BANK_JSON, crate::model::DEFAULT_QUESTION_COUNT)
            .expect("shipped sample bank is valid")
    }

    /// A synthetic bank of `n` items, used by tests and demos.
    pub fn synthetic(n: usize) -> QuestionBank {
        let items = (1..=n as u32)
            .map(|i| Question {
                index: i,
                text: format!("Item {i}"),
                direction: if i % 3 == 0 { Direction::Inverse } else { Direction::Direct },
                media_url: None,
            })
            .collect();
        validate_question_bank(items, n).expect("synthetic bank is contiguous")
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Question by 1-based index.
    pub fn get(&self, index: u32) -> Option<&Question> {
        index.checked_sub(1).and_then(|i| self.items.get(i as usize))
    }

    pub fn direction(&self, index: u32) -> Option<Direction> {
        self.get(index).map(|q| q.direction)
    }

    pub fn items(&self) -> &[Question] {
        &self.items
    }
}
