use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{TagEntity, TaggingError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagEntry {
    pub alias: String,
    pub entity: TagEntity,
    pub tagged_at: DateTime<Utc>,
}

/// Term to (alias, entity) mapping. Each term has at most one entry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagVocabulary {
    entries: BTreeMap<String, TagEntry>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    term: String,
    alias: String,
    entity: String,
    timestamp: String,
}

pub(crate) fn normalize_alias(alias: &str, entity: TagEntity) -> Result<String, TaggingError> {
    let alias = alias.trim().to_lowercase();
    if alias.is_empty() && entity != TagEntity::X {
        return Err(TaggingError::EmptyAlias(entity));
    }
    Ok(alias)
}

impl TagVocabulary {
    /// Adds or replaces the entry for `term`, returning the previous one.
    ///
    /// The alias is trimmed and lowercased; it may only be empty for `X`.
    pub fn insert(
        &mut self,
        term: &str,
        alias: &str,
        entity: TagEntity,
        tagged_at: DateTime<Utc>,
    ) -> Result<Option<TagEntry>, TaggingError> {
        let alias = normalize_alias(alias, entity)?;
        Ok(self.entries.insert(
            term.to_string(),
            TagEntry {
                alias,
                entity,
                tagged_at,
            },
        ))
    }

    pub fn get(&self, term: &str) -> Option<&TagEntry> {
        self.entries.get(term)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.entries.contains_key(term)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in term order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &TagEntry)> {
        self.entries.iter().map(|(t, e)| (t.as_str(), e))
    }

    /// Terms mapped to `alias` with `entity`.
    pub fn terms_for(&self, alias: &str, entity: TagEntity) -> Vec<&str> {
        self.iter()
            .filter(|(_, e)| e.alias == alias && e.entity == entity)
            .map(|(t, _)| t)
            .collect()
    }

    /// Writes `term,alias,entity,timestamp` rows, sorted by term.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TaggingError> {
        let mut w = csv::Writer::from_writer(writer);
        for (term, e) in self.iter() {
            w.serialize(CsvRow {
                term: term.to_string(),
                alias: e.alias.clone(),
                entity: e.entity.as_str().to_string(),
                timestamp: e.tagged_at.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
            })?;
        }
        w.flush().map_err(|source| TaggingError::Io {
            path: "<vocabulary>".into(),
            source,
        })?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), TaggingError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|source| TaggingError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, TaggingError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut vocab = TagVocabulary::default();
        for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
            let line = i as u64 + 2;
            let row = row?;
            let invalid = |message: String| TaggingError::InvalidVocabularyRow { line, message };
            let entity: TagEntity = row.entity.parse().map_err(|e: TaggingError| invalid(e.to_string()))?;
            let tagged_at = DateTime::parse_from_rfc3339(&row.timestamp)
                .map_err(|e| invalid(format!("timestamp `{}`: {e}", row.timestamp)))?
                .with_timezone(&Utc);
            let term = row.term.to_lowercase();
            if term.is_empty() {
                return Err(invalid("empty term".into()));
            }
            if vocab.contains(&term) {
                return Err(TaggingError::DuplicateTerm(term));
            }
            vocab
                .insert(&term, &row.alias, entity, tagged_at)
                .map_err(|e| invalid(e.to_string()))?;
        }
        Ok(vocab)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, TaggingError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| TaggingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_csv(file)
    }
}
