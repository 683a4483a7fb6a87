use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::terms::TERM_SEPARATOR;

/// Per-knowledge-graph configuration telling the extractor which IRIs are
/// schema items.
///
/// Namespace entries may be written either as full IRI prefixes
/// (`http://dbpedia.org/ontology/`) or as compact prefixes (`dbo:`); a term
/// matches when either its expanded IRI or its compact form starts with the
/// entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgProfile {
    pub name: String,
    pub relation_namespaces: Vec<String>,
    pub class_namespaces: Vec<String>,
    pub type_predicates: Vec<String>,
    #[serde(default = "default_aggregates")]
    pub aggregate_keywords: BTreeSet<String>,
    #[serde(default = "default_comparators")]
    pub comparators: BTreeSet<String>,
    /// Prefix label → namespace IRI, used to put full IRIs and prefixed names
    /// for the same resource into one canonical compact form. Queries' own
    /// `PREFIX` declarations override these.
    #[serde(default)]
    pub prefixes: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("unknown built-in profile '{0}' (expected dbpedia, wikidata or freebase)")]
    Unknown(String),
    #[error("invalid profile '{name}': {reason}")]
    Invalid { name: String, reason: String },
    #[error("cannot read profile {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse profile: {0}")]
    Parse(#[from] serde_json::Error),
}

fn default_aggregates() -> BTreeSet<String> {
    ["COUNT"].into_iter().map(String::from).collect()
}

fn default_comparators() -> BTreeSet<String> {
    ["<", ">", "<=", ">=", "!="].into_iter().map(String::from).collect()
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn prefix_map(items: &[(&str, &str)]) -> BTreeMap<String, String> {
    items
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";

impl KgProfile {
    pub const BUILTIN: [&'static str; 3] = ["dbpedia", "wikidata", "freebase"];

    pub fn builtin(name: &str) -> Result<Self, ProfileError> {
        let profile = match name.to_ascii_lowercase().as_str() {
            "dbpedia" => Self::dbpedia(),
            "wikidata" => Self::wikidata(),
            "freebase" => Self::freebase(),
            _ => return Err(ProfileError::Unknown(name.to_string())),
        };
        Ok(profile)
    }

    /// DBpedia: ontology, property and common vocabulary relations (FOAF,
    /// Dublin Core, SKOS, RDFS); `rdf:type` objects in the ontology and YAGO
    /// namespaces are classes. `rdf:type` itself is not a relation.
    pub fn dbpedia() -> Self {
        KgProfile {
            name: "dbpedia".into(),
            relation_namespaces: strings(&[
                "http://dbpedia.org/ontology/",
                "http://dbpedia.org/property/",
                "http://xmlns.com/foaf/0.1/",
                "http://purl.org/dc/terms/",
                "http://www.w3.org/2004/02/skos/core#",
                RDFS,
            ]),
            class_namespaces: strings(&["http://dbpedia.org/ontology/", "http://dbpedia.org/class/yago/"]),
            type_predicates: strings(&["rdf:type", "a"]),
            aggregate_keywords: default_aggregates(),
            comparators: default_comparators(),
            prefixes: prefix_map(&[
                ("dbo", "http://dbpedia.org/ontology/"),
                ("dbp", "http://dbpedia.org/property/"),
                ("dbr", "http://dbpedia.org/resource/"),
                ("dbc", "http://dbpedia.org/resource/Category:"),
                ("yago", "http://dbpedia.org/class/yago/"),
                ("rdf", RDF),
                ("rdfs", RDFS),
                ("foaf", "http://xmlns.com/foaf/0.1/"),
                ("dct", "http://purl.org/dc/terms/"),
                ("skos", "http://www.w3.org/2004/02/skos/core#"),
                ("owl", "http://www.w3.org/2002/07/owl#"),
                ("xsd", "http://www.w3.org/2001/XMLSchema#"),
            ]),
        }
    }

    /// Wikidata: every property namespace is relational; class objects of
    /// `wdt:P31` are entities (`wd:`) and so no class namespace is listed.
    pub fn wikidata() -> Self {
        KgProfile {
            name: "wikidata".into(),
            relation_namespaces: strings(&[
                "http://www.wikidata.org/prop/direct/",
                "http://www.wikidata.org/prop/statement/",
                "http://www.wikidata.org/prop/qualifier/",
                "http://www.wikidata.org/prop/",
                "http://schema.org/",
                RDFS,
            ]),
            class_namespaces: Vec::new(),
            type_predicates: strings(&["wdt:P31"]),
            aggregate_keywords: default_aggregates(),
            comparators: default_comparators(),
            prefixes: prefix_map(&[
                ("wd", "http://www.wikidata.org/entity/"),
                ("wdt", "http://www.wikidata.org/prop/direct/"),
                ("p", "http://www.wikidata.org/prop/"),
                ("ps", "http://www.wikidata.org/prop/statement/"),
                ("pq", "http://www.wikidata.org/prop/qualifier/"),
                ("rdf", RDF),
                ("rdfs", RDFS),
                ("schema", "http://schema.org/"),
                ("skos", "http://www.w3.org/2004/02/skos/core#"),
                ("xsd", "http://www.w3.org/2001/XMLSchema#"),
            ]),
        }
    }

    /// Freebase: relations and types share the `ns:` namespace; only the
    /// position in the triple tells them apart.
    pub fn freebase() -> Self {
        KgProfile {
            name: "freebase".into(),
            relation_namespaces: strings(&["http://rdf.freebase.com/ns/"]),
            class_namespaces: strings(&["http://rdf.freebase.com/ns/"]),
            type_predicates: strings(&["ns:type.object.type", "rdf:type", "a"]),
            aggregate_keywords: default_aggregates(),
            comparators: default_comparators(),
            prefixes: prefix_map(&[
                ("ns", "http://rdf.freebase.com/ns/"),
                ("rdf", RDF),
                ("rdfs", RDFS),
                ("xsd", "http://www.w3.org/2001/XMLSchema#"),
            ]),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ProfileError> {
        let profile: KgProfile = serde_json::from_slice(bytes)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn from_file(path: &Path) -> Result<Self, ProfileError> {
        let bytes = std::fs::read(path).map_err(|source| ProfileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&bytes)
    }

    /// Resolve a `--profile` argument: a built-in name or a JSON file path.
    pub fn resolve(name_or_path: &str) -> Result<Self, ProfileError> {
        match Self::builtin(name_or_path) {
            Ok(p) => Ok(p),
            Err(ProfileError::Unknown(_)) if Path::new(name_or_path).exists() => {
                Self::from_file(Path::new(name_or_path))
            }
            Err(e) => Err(e),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let invalid = |reason: String| ProfileError::Invalid {
            name: self.name.clone(),
            reason,
        };
        if self.aggregate_keywords.is_empty() {
            return Err(invalid("aggregate_keywords must not be empty".into()));
        }
        if self.comparators.is_empty() {
            return Err(invalid("comparators must not be empty".into()));
        }
        for (field, list) in [
            ("relation_namespaces", &self.relation_namespaces),
            ("class_namespaces", &self.class_namespaces),
        ] {
            let unique: BTreeSet<&String> = list.iter().collect();
            if unique.len() != list.len() {
                return Err(invalid(format!("{field} contains duplicates")));
            }
        }
        let all = self
            .aggregate_keywords
            .iter()
            .chain(&self.comparators)
            .chain(&self.type_predicates);
        for item in all {
            if item.is_empty() || item.contains(TERM_SEPARATOR) {
                return Err(invalid(format!("invalid entry {item:?}")));
            }
        }
        Ok(())
    }

    /// Canonical spelling of an aggregate keyword as listed in the profile.
    pub(crate) fn aggregate_name(&self, keyword: &str) -> Option<&str> {
        self.aggregate_keywords
            .iter()
            .find(|a| a.eq_ignore_ascii_case(keyword))
            .map(String::as_str)
    }
}
