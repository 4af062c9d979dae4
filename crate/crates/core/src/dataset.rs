use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_jsonl_numbered;
use crate::types::{GoldAnswers, Question};

/// One `{id, question, answers}` dataset line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub question: Question,
    pub gold: GoldAnswers,
}

impl TryFrom<DatasetRecord> for Example {
    type Error = Error;

    fn try_from(r: DatasetRecord) -> Result<Self> {
        Ok(Example { question: Question::new(r.id, r.question)?, gold: GoldAnswers::new(r.answers)? })
    }
}

impl From<&Example> for DatasetRecord {
    fn from(e: &Example) -> Self {
        DatasetRecord { id: e.question.id().to_owned(), question: e.question.text().to_owned(), answers: e.gold.answers().to_vec() }
    }
}

pub fn load_dataset(path: &Path) -> Result<Vec<Example>> {
    read_jsonl_numbered::<DatasetRecord>(path)?
        .into_iter()
        .map(|(line, r)| Example::try_from(r).map_err(|e| Error::Parse { path: path.to_owned(), line, reason: e.to_string() }))
        .collect()
}
