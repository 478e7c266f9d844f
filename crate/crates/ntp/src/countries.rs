//! Builds the Countries KB from the `world-countries` JSON package.
//!
//! Each entry with a region yields `locatedIn(country, region)`,
//! `locatedIn(country, subregion)` and one `neighborOf` atom per border;
//! each subregion yields `locatedIn(subregion, region)`. Names are
//! lower-cased ASCII with `_` separators.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Deserialize)]
struct Name {
    common: String,
}

#[derive(Deserialize)]
struct Entry {
    name: Name,
    cca3: String,
    #[serde(default)]
    region: String,
    #[serde(default)]
    subregion: String,
    #[serde(default)]
    borders: Vec<String>,
}

pub fn symbol_name(raw: &str) -> String {
    let mut out = String::new();
    for ch in raw.chars().flat_map(char::to_lowercase) {
        let c = match ch {
            'a'..='z' | '0'..='9' => ch,
            'à' | 'á' | 'â' | 'ã' | 'ä' | 'å' => 'a',
            'ç' => 'c',
            'è' | 'é' | 'ê' | 'ë' => 'e',
            'ì' | 'í' | 'î' | 'ï' => 'i',
            'ñ' => 'n',
            'ò' | 'ó' | 'ô' | 'õ' | 'ö' => 'o',
            'ù' | 'ú' | 'û' | 'ü' => 'u',
            _ => '_',
        };
        if c == '_' && (out.is_empty() || out.ends_with('_')) {
            continue;
        }
        out.push(c);
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

/// `(relation, arg1, arg2)` triples, sorted.
pub fn countries_triples(json: &str) -> Result<Vec<(String, String, String)>> {
    let entries: Vec<Entry> = serde_json::from_str(json).context("parsing countries JSON")?;
    let entries: Vec<&Entry> = entries.iter().filter(|e| !e.region.is_empty()).collect();
    let mut names: HashMap<&str, String> = HashMap::new();
    // Region and subregion names are reserved: a country called like its
    // subregion (Micronesia) gets its code appended.
    let mut used: BTreeSet<String> = entries
        .iter()
        .flat_map(|e| [symbol_name(&e.region), symbol_name(&e.subregion)])
        .filter(|n| !n.is_empty())
        .collect();
    for e in &entries {
        let mut n = symbol_name(&e.name.common);
        if n.is_empty() || !used.insert(n.clone()) {
            n = format!("{n}_{}", e.cca3.to_lowercase());
            used.insert(n.clone());
        }
        names.insert(e.cca3.as_str(), n);
    }
    let mut out = BTreeSet::new();
    let mut sub_region: BTreeMap<String, String> = BTreeMap::new();
    for e in &entries {
        let c = &names[e.cca3.as_str()];
        let region = symbol_name(&e.region);
        out.insert(("locatedIn".to_string(), c.clone(), region.clone()));
        if !e.subregion.is_empty() {
            let sub = symbol_name(&e.subregion);
            if let Some(prev) = sub_region.insert(sub.clone(), region.clone()) {
                if prev != region {
                    bail!("subregion `{sub}` lies in both `{prev}` and `{region}`");
                }
            }
            out.insert(("locatedIn".to_string(), c.clone(), sub));
        }
        for b in &e.borders {
            if let Some(n) = names.get(b.as_str()) {
                out.insert(("neighborOf".to_string(), c.clone(), n.clone()));
            }
        }
    }
    for (sub, region) in sub_region {
        out.insert(("locatedIn".to_string(), sub, region));
    }
    Ok(out.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names() {
        assert_eq!(symbol_name("Åland Islands"), "aland_islands");
        assert_eq!(symbol_name("Cocos (Keeling) Islands"), "cocos_keeling_islands");
        assert_eq!(symbol_name("São Tomé and Príncipe"), "sao_tome_and_principe");
        assert_eq!(symbol_name("South-Eastern Asia"), "south_eastern_asia");
    }

    #[test]
    fn small_file() {
        let json = r#"[
          {"name": {"common": "France"}, "cca3": "FRA", "region": "Europe",
           "subregion": "Western Europe", "borders": ["ESP", "XXX"]},
          {"name": {"common": "Spain"}, "cca3": "ESP", "region": "Europe",
           "subregion": "Southern Europe", "borders": ["FRA"]},
          {"name": {"common": "Antarctica"}, "cca3": "ATA", "region": "", "subregion": "", "borders": []}
        ]"#;
        let t = countries_triples(json).unwrap();
        let has = |r: &str, a: &str, b: &str| t.contains(&(r.into(), a.into(), b.into()));
        assert_eq!(t.len(), 8);
        assert!(has("locatedIn", "france", "western_europe"));
        assert!(has("locatedIn", "western_europe", "europe"));
        assert!(has("neighborOf", "spain", "france"));
        assert!(!t.iter().any(|x| x.1 == "antarctica"));

        let json = r#"[
          {"name": {"common": "Micronesia"}, "cca3": "FSM", "region": "Oceania",
           "subregion": "Micronesia", "borders": []}
        ]"#;
        let t = countries_triples(json).unwrap();
        assert!(t.contains(&("locatedIn".into(), "micronesia_fsm".into(), "micronesia".into())));
        assert_eq!(t.len(), 3);
    }
}
