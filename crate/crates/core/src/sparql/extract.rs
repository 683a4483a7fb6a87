//! Schema-term extraction.
//!
//! A schema term is one of
//!
//! * a relation: an IRI in predicate position (each component of a property
//!   path counts separately) whose namespace is listed in
//!   [`KgProfile::relation_namespaces`];
//! * a class: the object of a type predicate whose namespace is listed in
//!   [`KgProfile::class_namespaces`];
//! * an aggregate keyword from [`KgProfile::aggregate_keywords`] used in a
//!   `SELECT` clause;
//! * a comparator from [`KgProfile::comparators`] used in a `FILTER` or
//!   `HAVING` expression, subqueries included.
//!
//! IRIs are reported in a canonical compact form: the expanded IRI is
//! re-compacted with the profile's prefix table, then with the query's own
//! `PREFIX` declarations, and kept as `<iri>` when neither applies. Prefixed
//! names whose prefix cannot be expanded keep their surface form.

use std::collections::{BTreeMap, BTreeSet};

use super::profile::KgProfile;
use super::terms::SchemaTermSet;
use super::token::{tokenize, Token, TokenKind, TokenizeError};

const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

/// Extract the schema-term set of `query` under `profile`.
pub fn extract_terms(query: &str, profile: &KgProfile) -> Result<SchemaTermSet, TokenizeError> {
    let tokens = tokenize(query)?;
    let mut ex = Extractor {
        toks: &tokens,
        i: 0,
        profile,
        query_prefixes: BTreeMap::new(),
        terms: BTreeSet::new(),
    };
    ex.parse_block(false);
    Ok(SchemaTermSet::from_sorted_set(ex.terms))
}

/// An IRI-valued token after prefix resolution.
#[derive(Debug, Clone)]
struct Resource {
    /// Expanded IRI, when the prefix could be resolved.
    iri: Option<String>,
    /// Canonical compact spelling used as the term id.
    canonical: String,
    surface: String,
}

struct Extractor<'a> {
    toks: &'a [Token],
    i: usize,
    profile: &'a KgProfile,
    query_prefixes: BTreeMap<String, String>,
    terms: BTreeSet<String>,
}

impl<'a> Extractor<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.i)
    }

    fn peek_at(&self, ahead: usize) -> Option<&'a Token> {
        self.toks.get(self.i + ahead)
    }

    fn next_is_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    /// Walk a sequence of clauses. With `in_group` set, stops after the
    /// closing brace and treats leading terms as triple subjects.
    fn parse_block(&mut self, in_group: bool) {
        while let Some(tok) = self.peek() {
            match tok.kind {
                TokenKind::Punctuation if tok.text == "}" => {
                    self.i += 1;
                    if in_group {
                        return;
                    }
                }
                TokenKind::Punctuation if tok.text == "{" => {
                    self.i += 1;
                    self.parse_block(true);
                }
                TokenKind::Keyword if !tok.is_rdf_type_shorthand() => self.parse_keyword(tok),
                TokenKind::Punctuation if in_group && (tok.text == "[" || tok.text == "(") => {
                    self.parse_triples_same_subject()
                }
                _ if in_group && tok.is_term() => self.parse_triples_same_subject(),
                _ => self.i += 1,
            }
        }
    }

    fn parse_keyword(&mut self, tok: &Token) {
        let kw = tok.normalized();
        self.i += 1;
        match kw.as_str() {
            "PREFIX" => self.parse_prefix_decl(),
            "BASE" => {
                if self.peek().is_some_and(|t| t.kind == TokenKind::FullIri) {
                    self.i += 1;
                }
            }
            "SELECT" => self.parse_select_clause(),
            "FILTER" => self.parse_constraint(true),
            "HAVING" => {
                while self.peek().is_some_and(starts_constraint) {
                    let before = self.i;
                    self.parse_constraint(true);
                    if self.i == before {
                        break;
                    }
                }
            }
            "BIND" => self.parse_constraint(false),
            "VALUES" => self.skip_values(),
            "GROUP" | "ORDER" => {
                if self.peek().is_some_and(|t| t.is_keyword("BY")) {
                    self.i += 1;
                }
                self.skip_conditions();
            }
            "LIMIT" | "OFFSET" => {
                if self.peek().is_some_and(|t| t.kind == TokenKind::Literal) {
                    self.i += 1;
                }
            }
            "GRAPH" | "SERVICE" => {
                if self.peek().is_some_and(|t| t.is_keyword("SILENT")) {
                    self.i += 1;
                }
                if self.peek().is_some_and(Token::is_term) {
                    self.i += 1;
                }
            }
            "FROM" => {
                if self.peek().is_some_and(|t| t.is_keyword("NAMED")) {
                    self.i += 1;
                }
                if self.peek().is_some_and(Token::is_term) {
                    self.i += 1;
                }
            }
            _ => {}
        }
    }

    fn parse_prefix_decl(&mut self) {
        let (Some(name), Some(iri)) = (self.peek(), self.peek_at(1)) else {
            return;
        };
        if name.kind == TokenKind::PrefixedName && iri.kind == TokenKind::FullIri {
            if let Some(label) = name.text.strip_suffix(':') {
                self.query_prefixes
                    .insert(label.to_string(), strip_angles(&iri.text).to_string());
            }
            self.i += 2;
        }
    }

    /// Projection clause: record aggregates up to the start of the pattern.
    fn parse_select_clause(&mut self) {
        while let Some(tok) = self.peek() {
            if tok.is_punct("{") || tok.is_keyword("WHERE") || tok.is_keyword("FROM") {
                return;
            }
            if tok.kind == TokenKind::Keyword {
                if let Some(name) = self.profile.aggregate_name(&tok.text) {
                    self.terms.insert(name.to_string());
                }
            }
            self.i += 1;
        }
    }

    /// `FILTER`/`HAVING`/`BIND` argument: a bracketted expression, a function
    /// call, or `[NOT] EXISTS { ... }`.
    fn parse_constraint(&mut self, collect: bool) {
        let Some(tok) = self.peek() else { return };
        if tok.is_punct("(") {
            self.parse_paren_expr(collect);
            return;
        }
        if tok.is_keyword("NOT") {
            self.i += 1;
        }
        if self.peek().is_some_and(|t| t.is_keyword("EXISTS")) {
            self.i += 1;
            if self.next_is_punct("{") {
                self.i += 1;
                self.parse_block(true);
            }
            return;
        }
        let Some(tok) = self.peek() else { return };
        if matches!(
            tok.kind,
            TokenKind::Keyword | TokenKind::PrefixedName | TokenKind::FullIri
        ) {
            self.i += 1;
            if self.next_is_punct("(") {
                self.parse_paren_expr(collect);
            }
        }
    }

    fn parse_paren_expr(&mut self, collect: bool) {
        debug_assert!(self.next_is_punct("("));
        self.i += 1;
        let mut depth = 1usize;
        while let Some(tok) = self.peek() {
            match tok.kind {
                TokenKind::Punctuation if tok.text == "(" => depth += 1,
                TokenKind::Punctuation if tok.text == ")" => {
                    depth -= 1;
                    if depth == 0 {
                        self.i += 1;
                        return;
                    }
                }
                TokenKind::Punctuation if tok.text == "{" => {
                    self.i += 1;
                    self.parse_block(true);
                    continue;
                }
                // malformed: leave the brace to the enclosing group
                TokenKind::Punctuation if tok.text == "}" => return,
                TokenKind::Operator if collect && self.profile.comparators.contains(&tok.text) => {
                    self.terms.insert(tok.text.clone());
                }
                _ => {}
            }
            self.i += 1;
        }
    }

    /// `GROUP BY` / `ORDER BY` condition list.
    fn skip_conditions(&mut self) {
        while let Some(tok) = self.peek() {
            match tok.kind {
                TokenKind::Variable => self.i += 1,
                TokenKind::Punctuation if tok.text == "(" => self.parse_paren_expr(false),
                TokenKind::Keyword
                    if !is_clause_keyword(tok)
                        && self.peek_at(1).is_some_and(|t| t.is_punct("(")) =>
                {
                    self.i += 1;
                    self.parse_paren_expr(false);
                }
                _ => return,
            }
        }
    }

    fn skip_values(&mut self) {
        if self.next_is_punct("(") {
            while let Some(tok) = self.peek() {
                self.i += 1;
                if tok.is_punct(")") {
                    break;
                }
            }
        } else if self.peek().is_some_and(|t| t.kind == TokenKind::Variable) {
            self.i += 1;
        }
        if self.next_is_punct("{") {
            let mut depth = 0usize;
            while let Some(tok) = self.peek() {
                self.i += 1;
                if tok.is_punct("{") {
                    depth += 1;
                } else if tok.is_punct("}") {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
            }
        }
    }

    fn parse_triples_same_subject(&mut self) {
        let Some(tok) = self.peek() else { return };
        if tok.is_punct("[") {
            self.parse_blank_node_property_list();
        } else if tok.is_punct("(") {
            self.parse_collection();
        } else {
            self.i += 1;
        }
        self.parse_property_list();
    }

    fn parse_property_list(&mut self) {
        while self.peek().is_some_and(starts_verb) {
            let before = self.i;
            let is_type = self.parse_verb();
            self.parse_object_list(is_type);
            let mut saw_semicolon = false;
            while self.next_is_punct(";") {
                self.i += 1;
                saw_semicolon = true;
            }
            if !saw_semicolon || self.i == before {
                return;
            }
        }
    }

    /// Parse a predicate or property path, recording relation terms.
    /// Returns whether the verb is a plain type predicate.
    fn parse_verb(&mut self) -> bool {
        let Some(tok) = self.peek() else { return false };
        if tok.kind == TokenKind::Variable {
            self.i += 1;
            return false;
        }
        let mut components = Vec::new();
        let mut decorated = false;
        self.parse_path(&mut components, &mut decorated);
        for res in &components {
            if self.in_namespaces(res, &self.profile.relation_namespaces) {
                self.terms.insert(res.canonical.clone());
            }
        }
        components.len() == 1 && !decorated && self.is_type_predicate(&components[0])
    }

    /// Property path: alternatives and sequences of (possibly inverted,
    /// negated, grouped or repeated) primaries.
    fn parse_path(&mut self, out: &mut Vec<Resource>, decorated: &mut bool) {
        loop {
            // prefix operators
            while let Some(tok) = self.peek() {
                if tok.is_operator("^") || tok.is_operator("!") {
                    *decorated = true;
                    self.i += 1;
                } else {
                    break;
                }
            }
            let Some(tok) = self.peek() else { return };
            if tok.is_punct("(") {
                *decorated = true;
                self.i += 1;
                self.parse_path(out, decorated);
                if self.next_is_punct(")") {
                    self.i += 1;
                }
            } else if let Some(res) = self.resource(tok) {
                out.push(res);
                self.i += 1;
            } else {
                return;
            }
            // postfix modifiers
            while let Some(tok) = self.peek() {
                if tok.is_operator("*") || tok.is_operator("+") || tok.is_operator("?") {
                    *decorated = true;
                    self.i += 1;
                } else {
                    break;
                }
            }
            match self.peek() {
                Some(t) if t.is_operator("/") || t.is_operator("|") => {
                    *decorated = true;
                    self.i += 1;
                }
                _ => return,
            }
        }
    }

    fn parse_object_list(&mut self, is_type: bool) {
        loop {
            self.parse_object(is_type);
            if self.next_is_punct(",") {
                self.i += 1;
            } else {
                return;
            }
        }
    }

    fn parse_object(&mut self, is_type: bool) {
        let Some(tok) = self.peek() else { return };
        if tok.is_punct("[") {
            self.parse_blank_node_property_list();
        } else if tok.is_punct("(") {
            self.parse_collection();
        } else if tok.is_term() {
            if is_type {
                if let Some(res) = self.resource(tok) {
                    if self.in_namespaces(&res, &self.profile.class_namespaces) {
                        self.terms.insert(res.canonical);
                    }
                }
            }
            self.i += 1;
        }
    }

    fn parse_blank_node_property_list(&mut self) {
        debug_assert!(self.next_is_punct("["));
        self.i += 1;
        self.parse_property_list();
        let mut depth = 1usize;
        while let Some(tok) = self.peek() {
            if tok.is_punct("}") || tok.is_punct("{") {
                return;
            }
            self.i += 1;
            if tok.is_punct("[") {
                depth += 1;
            } else if tok.is_punct("]") {
                depth -= 1;
                if depth == 0 {
                    return;
                }
            }
        }
    }

    fn parse_collection(&mut self) {
        debug_assert!(self.next_is_punct("("));
        self.i += 1;
        while let Some(tok) = self.peek() {
            if tok.is_punct(")") {
                self.i += 1;
                return;
            }
            if tok.is_punct("}") || tok.is_punct("{") {
                return;
            }
            if tok.is_punct("[") {
                self.parse_blank_node_property_list();
            } else if tok.is_punct("(") {
                self.parse_collection();
            } else {
                self.i += 1;
            }
        }
    }

    /// Resolve an IRI-valued token. `a` resolves to the RDF type IRI.
    fn resource(&self, tok: &Token) -> Option<Resource> {
        match tok.kind {
            TokenKind::FullIri => {
                let iri = strip_angles(&tok.text).to_string();
                Some(Resource {
                    canonical: self.compact(&iri).unwrap_or_else(|| tok.text.clone()),
                    iri: Some(iri),
                    surface: tok.text.clone(),
                })
            }
            TokenKind::PrefixedName if !tok.text.starts_with("_:") => {
                let iri = self.expand(&tok.text);
                let canonical = iri
                    .as_deref()
                    .and_then(|iri| self.compact(iri))
                    .unwrap_or_else(|| tok.text.clone());
                Some(Resource {
                    iri,
                    canonical,
                    surface: tok.text.clone(),
                })
            }
            TokenKind::Keyword if tok.is_rdf_type_shorthand() => Some(Resource {
                iri: Some(RDF_TYPE.to_string()),
                canonical: self.compact(RDF_TYPE).unwrap_or_else(|| format!("<{RDF_TYPE}>")),
                surface: "a".to_string(),
            }),
            _ => None,
        }
    }

    fn expand(&self, pname: &str) -> Option<String> {
        let (label, local) = pname.split_once(':')?;
        let ns = self
            .query_prefixes
            .get(label)
            .or_else(|| self.profile.prefixes.get(label))?;
        Some(format!("{ns}{}", unescape_local(local)))
    }

    fn compact(&self, iri: &str) -> Option<String> {
        compact_with(&self.profile.prefixes, iri).or_else(|| compact_with(&self.query_prefixes, iri))
    }

    fn in_namespaces(&self, res: &Resource, namespaces: &[String]) -> bool {
        namespaces.iter().any(|ns| {
            res.iri.as_deref().is_some_and(|iri| iri.starts_with(ns.as_str()))
                || res.canonical.starts_with(ns.as_str())
                || res.surface.starts_with(ns.as_str())
        })
    }

    fn is_type_predicate(&self, res: &Resource) -> bool {
        self.profile.type_predicates.iter().any(|entry| {
            if entry == "a" {
                return res.surface == "a";
            }
            let entry_iri = if entry.starts_with('<') {
                Some(strip_angles(entry).to_string())
            } else {
                self.expand(entry)
            };
            match (&entry_iri, &res.iri) {
                (Some(a), Some(b)) => a == b,
                _ => entry == &res.canonical || entry == &res.surface,
            }
        })
    }
}

fn compact_with(prefixes: &BTreeMap<String, String>, iri: &str) -> Option<String> {
    prefixes
        .iter()
        .filter(|(_, ns)| !ns.is_empty() && iri.starts_with(ns.as_str()))
        .max_by_key(|(label, ns)| (ns.len(), std::cmp::Reverse(label.len())))
        .map(|(label, ns)| format!("{label}:{}", &iri[ns.len()..]))
}

fn strip_angles(s: &str) -> &str {
    s.strip_prefix('<')
        .and_then(|s| s.strip_suffix('>'))
        .unwrap_or(s)
}

fn unescape_local(local: &str) -> String {
    let mut out = String::with_capacity(local.len());
    let mut chars = local.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(n) = chars.next() {
                out.push(n);
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn starts_verb(tok: &Token) -> bool {
    matches!(
        tok.kind,
        TokenKind::Variable | TokenKind::PrefixedName | TokenKind::FullIri
    ) || tok.is_rdf_type_shorthand()
        || tok.is_operator("^")
        || tok.is_operator("!")
        || tok.is_punct("(")
}

fn starts_constraint(tok: &Token) -> bool {
    tok.is_punct("(")
        || (tok.kind == TokenKind::Keyword && !is_clause_keyword(tok))
        || matches!(tok.kind, TokenKind::PrefixedName | TokenKind::FullIri)
}

fn is_clause_keyword(tok: &Token) -> bool {
    const CLAUSES: [&str; 8] = ["ORDER", "LIMIT", "OFFSET", "VALUES", "GROUP", "HAVING", "SELECT", "WHERE"];
    CLAUSES.iter().any(|kw| tok.is_keyword(kw))
}
