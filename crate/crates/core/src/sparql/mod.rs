//! SPARQL tokenization and schema-term extraction.

mod extract;
mod profile;
mod terms;
mod token;

pub use extract::extract_terms;
pub use profile::{KgProfile, ProfileError};
pub use terms::{canonical_key, GroupKey, InvalidTerm, SchemaTermSet, TERM_SEPARATOR};
pub use token::{tokenize, Token, TokenKind, TokenizeError};
