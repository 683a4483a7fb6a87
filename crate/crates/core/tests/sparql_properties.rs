use kgqa_core::sparql::{extract_terms, tokenize, KgProfile, SchemaTermSet};
use proptest::prelude::*;

const RELATIONS: &[&str] = &["dbo:author", "dbo:birthPlace", "dbp:name", "foaf:name", "dbo:spouse"];
const CLASSES: &[&str] = &["dbo:Person", "dbo:City", "dbo:Book"];
const ENTITIES: &[&str] = &["dbr:Berlin", "dbr:Ada_Lovelace", "dbr:Intel"];

#[derive(Debug, Clone)]
enum Triple {
    Rel { s: usize, p: usize, o: usize, entity: bool },
    Type { s: usize, c: usize },
}

impl Triple {
    fn render(&self) -> String {
        match self {
            Triple::Rel { s, p, o, entity } => {
                let o = if *entity { ENTITIES[*o % ENTITIES.len()].to_string() } else { format!("?v{o}") };
                format!("?v{s} {} {o}", RELATIONS[*p])
            }
            Triple::Type { s, c } => format!("?v{s} a {}", CLASSES[*c]),
        }
    }

    /// Terms the triple contributes, derived from the generator alone.
    fn expected(&self) -> &'static str {
        match self {
            Triple::Rel { p, .. } => RELATIONS[*p],
            Triple::Type { c, .. } => CLASSES[*c],
        }
    }
}

fn triple() -> impl Strategy<Value = Triple> {
    prop_oneof![
        (0..4usize, 0..RELATIONS.len(), 0..4usize, any::<bool>())
            .prop_map(|(s, p, o, entity)| Triple::Rel { s, p, o, entity }),
        (0..4usize, 0..CLASSES.len()).prop_map(|(s, c)| Triple::Type { s, c }),
    ]
}

fn query(triples: &[Triple], sep: &str, count: bool) -> String {
    let body: Vec<String> = triples.iter().map(Triple::render).collect();
    let head = if count { "SELECT (COUNT(?v0) AS ?n)" } else { "SELECT DISTINCT ?v0" };
    format!("{head} WHERE {{{sep}{}{sep}}}", body.join(&format!(" .{sep}")))
}

proptest! {
    #[test]
    fn terms_match_generator(triples in prop::collection::vec(triple(), 1..6), count in any::<bool>()) {
        let got = extract_terms(&query(&triples, " ", count), &KgProfile::dbpedia()).unwrap();
        let mut expected: Vec<&str> = triples.iter().map(Triple::expected).collect();
        if count {
            expected.push("COUNT");
        }
        prop_assert_eq!(got, SchemaTermSet::new(expected).unwrap());
    }

    #[test]
    fn whitespace_and_comments_do_not_matter(
        triples in prop::collection::vec(triple(), 1..6),
        sep in prop_oneof![Just(" "), Just("\n  "), Just("\t"), Just(" # note\n ")],
    ) {
        let p = KgProfile::dbpedia();
        prop_assert_eq!(
            extract_terms(&query(&triples, " ", false), &p).unwrap(),
            extract_terms(&query(&triples, sep, false), &p).unwrap()
        );
    }

    #[test]
    fn triple_order_does_not_matter(triples in prop::collection::vec(triple(), 1..6), seed in any::<u64>()) {
        let mut shuffled = triples.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed as usize ^ i.wrapping_mul(2654435761)) % (i + 1));
        }
        let p = KgProfile::dbpedia();
        prop_assert_eq!(
            extract_terms(&query(&triples, " ", false), &p).unwrap(),
            extract_terms(&query(&shuffled, " ", false), &p).unwrap()
        );
    }

    #[test]
    fn entities_and_variables_never_appear(triples in prop::collection::vec(triple(), 1..6)) {
        let terms = extract_terms(&query(&triples, " ", false), &KgProfile::dbpedia()).unwrap();
        for t in terms.iter() {
            prop_assert!(!t.starts_with('?') && !t.starts_with("dbr:"), "leaked {}", t);
        }
    }

    #[test]
    fn extraction_is_deterministic(triples in prop::collection::vec(triple(), 0..6)) {
        let q = query(&triples, " ", true);
        let p = KgProfile::dbpedia();
        prop_assert_eq!(extract_terms(&q, &p).unwrap(), extract_terms(&q, &p).unwrap());
    }

    #[test]
    fn tokens_are_verbatim_slices(triples in prop::collection::vec(triple(), 0..6), count in any::<bool>()) {
        let q = query(&triples, "\n", count);
        let chars: Vec<char> = q.chars().collect();
        for tok in tokenize(&q).unwrap() {
            let n = tok.text.chars().count();
            let slice: String = chars[tok.position..tok.position + n].iter().collect();
            prop_assert_eq!(slice, tok.text);
        }
    }

    #[test]
    fn canonical_key_is_order_free(terms in prop::collection::vec("[a-z:]{1,6}", 0..6)) {
        let mut rev = terms.clone();
        rev.reverse();
        prop_assert_eq!(
            SchemaTermSet::new(terms).unwrap().canonical_key(),
            SchemaTermSet::new(rev).unwrap().canonical_key()
        );
    }
}
