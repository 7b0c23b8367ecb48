//! Closed vocabulary of the generator and the resolution of string arguments.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::EventKind;

pub(crate) const PLAYERS: [&str; 40] = [
    "Smith", "Feely", "Janikowski", "Brady", "Manning", "Rivers", "Brees", "Favre", "Tomlinson", "Peterson",
    "Gore", "Jackson", "Johnson", "Williams", "Brown", "Davis", "Miller", "Wilson", "Moore", "Taylor",
    "Anderson", "Thomas", "Harris", "Martin", "Thompson", "Garcia", "Clark", "Lewis", "Walker", "Hall",
    "Allen", "Young", "King", "Wright", "Scott", "Green", "Baker", "Adams", "Nelson", "Carter",
];

pub(crate) const PLACES: [&str; 40] = [
    "Rullion Green", "Drumclog", "Bothwell Bridge", "Killiecrankie", "Dunkeld", "Sheriffmuir", "Prestonpans",
    "Falkirk", "Culloden", "Dunbar", "Worcester", "Naseby", "Marston Moor", "Edgehill", "Newbury", "Lansdown",
    "Roundway Down", "Adwalton Moor", "Preston", "Langport", "Rowton Heath", "Stow", "Kilsyth", "Alford",
    "Auldearn", "Tippermuir", "Inverlochy", "Philiphaugh", "Carbisdale", "Inverkeithing", "Glenshiel",
    "Cromdale", "Aberdeen", "Breda", "Utrecht", "Ryswick", "Nijmegen", "Westphalia", "Kolin", "Leuthen",
];

pub(crate) const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October", "November",
    "December",
];

pub(crate) const ORDINALS: [&str; 4] = ["first", "second", "third", "fourth"];

/// Tokens that attach to the preceding token when rendering text.
const CLITICS: [&str; 5] = ["?", ",", ".", "'s", "!"];

/// Joins tokens into display text: `["Smith", "'s", "kick", "?"]` → `"Smith's kick?"`.
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && !CLITICS.contains(&t.as_str()) {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

/// Splits display text back into tokens, separating clitics.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut w = word;
        let mut tail = Vec::new();
        loop {
            if let Some(rest) = w.strip_suffix(['?', ',', '.', '!']) {
                tail.push(w[rest.len()..].to_string());
                w = rest;
            } else {
                break;
            }
        }
        let (stem, clitic) = match w.strip_suffix("'s") {
            Some(stem) if !stem.is_empty() => (stem, true),
            _ => (w, false),
        };
        if !stem.is_empty() {
            out.push(stem.to_string());
        }
        if clitic {
            out.push("'s".to_string());
        }
        out.extend(tail.into_iter().rev());
    }
    out
}

/// What a `find` argument denotes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Predicate {
    pub kinds: Vec<EventKind>,
    pub agent: Option<String>,
}

/// What a `filter` argument denotes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Modifier {
    FirstHalf,
    SecondHalf,
    By(String),
}

struct KindPhrase {
    plural: &'static str,
    singular: &'static str,
    kinds: &'static [EventKind],
    /// Alternative surface form, if any.
    synonym: bool,
}

const KIND_PHRASES: [KindPhrase; 10] = [
    KindPhrase { plural: "field goals", singular: "field goal", kinds: &[EventKind::FieldGoal], synonym: false },
    KindPhrase { plural: "touchdown passes", singular: "touchdown pass", kinds: &[EventKind::TouchdownPass], synonym: false },
    KindPhrase { plural: "passing touchdowns", singular: "passing touchdown", kinds: &[EventKind::TouchdownPass], synonym: true },
    KindPhrase { plural: "touchdown runs", singular: "touchdown run", kinds: &[EventKind::TouchdownRun], synonym: false },
    KindPhrase { plural: "rushing touchdowns", singular: "rushing touchdown", kinds: &[EventKind::TouchdownRun], synonym: true },
    KindPhrase {
        plural: "touchdowns",
        singular: "touchdown",
        kinds: &[EventKind::TouchdownPass, EventKind::TouchdownRun],
        synonym: false,
    },
    KindPhrase { plural: "battles", singular: "battle", kinds: &[EventKind::Battle], synonym: false },
    KindPhrase { plural: "treaties", singular: "treaty", kinds: &[EventKind::Treaty], synonym: false },
    KindPhrase { plural: "sieges", singular: "siege", kinds: &[EventKind::Siege], synonym: false },
    KindPhrase { plural: "scores", singular: "score", kinds: &[EventKind::FieldGoal, EventKind::TouchdownPass, EventKind::TouchdownRun], synonym: true },
];

const SYNONYM_GROUPS: [&[&str]; 9] = [
    &["touchdown", "touchdowns"],
    &["pass", "passes", "passing"],
    &["run", "runs", "rushing"],
    &["goal", "goals"],
    &["battle", "battles"],
    &["treaty", "treaties"],
    &["siege", "sieges"],
    &["score", "scores"],
    &["longest", "largest"],
];

const SUPERLATIVES: [(&str, &str); 3] = [("longest", "shortest"), ("largest", "smallest"), ("most", "fewest")];

/// Generator vocabulary: kind phrases, synonyms, modifiers and titles.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    _private: (),
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn eq_words(tokens: &[String], phrase: &str) -> bool {
    let mut it = phrase.split_whitespace();
    for t in tokens {
        match it.next() {
            Some(w) if w.eq_ignore_ascii_case(t) => {}
            _ => return false,
        }
    }
    it.next().is_none()
}

impl Lexicon {
    pub fn standard() -> Self {
        Lexicon::default()
    }

    /// Surface phrase for a group of kinds.
    pub fn kind_phrase(&self, kinds: &[EventKind], plural: bool, use_synonym: bool) -> Option<Vec<String>> {
        let mut candidates = KIND_PHRASES.iter().filter(|p| p.kinds == kinds);
        let first = candidates.clone().find(|p| !p.synonym);
        let pick = if use_synonym { candidates.find(|p| p.synonym).or(first) } else { first }?;
        Some(words(if plural { pick.plural } else { pick.singular }))
    }

    /// Kinds named by a bare kind phrase such as `passing touchdowns`.
    pub fn resolve_kind_phrase(&self, tokens: &[String]) -> Option<Vec<EventKind>> {
        KIND_PHRASES
            .iter()
            .find(|p| eq_words(tokens, p.plural) || eq_words(tokens, p.singular))
            .map(|p| p.kinds.to_vec())
    }

    /// Resolves a `find` argument: a kind phrase, `<Player> 's <kind phrase>`,
    /// or a title `Battle|Treaty|Siege of <Place>`.
    pub fn resolve_find(&self, tokens: &[String]) -> Option<Predicate> {
        if tokens.len() >= 3 && tokens[1] == "of" {
            let kind = match tokens[0].as_str() {
                "Battle" => EventKind::Battle,
                "Treaty" => EventKind::Treaty,
                "Siege" => EventKind::Siege,
                _ => return None,
            };
            let place = tokens[2..].join(" ");
            return PLACES.contains(&place.as_str()).then(|| Predicate { kinds: vec![kind], agent: Some(place) });
        }
        if let Some(i) = tokens.iter().position(|t| t == "'s") {
            let agent = tokens[..i].join(" ");
            if !PLAYERS.contains(&agent.as_str()) {
                return None;
            }
            let kinds = self.resolve_kind_phrase(&tokens[i + 1..])?;
            return Some(Predicate { kinds, agent: Some(agent) });
        }
        self.resolve_kind_phrase(tokens).map(|kinds| Predicate { kinds, agent: None })
    }

    pub fn resolve_filter(&self, tokens: &[String]) -> Option<Modifier> {
        if eq_words(tokens, "in the first half") {
            return Some(Modifier::FirstHalf);
        }
        if eq_words(tokens, "in the second half") {
            return Some(Modifier::SecondHalf);
        }
        match tokens {
            [by, name] if by == "by" && PLAYERS.contains(&name.as_str()) => Some(Modifier::By(name.clone())),
            _ => None,
        }
    }

    /// `project` arguments ask for the player: `Who kicked`, `Who threw`, ...
    pub fn resolve_project(&self, tokens: &[String]) -> bool {
        matches!(tokens, [who, verb] if who == "Who" && ["kicked", "threw", "ran", "scored"].contains(&verb.as_str()))
    }

    pub fn project_arg(&self, kinds: &[EventKind]) -> &'static str {
        match kinds {
            [EventKind::FieldGoal] => "Who kicked",
            [EventKind::TouchdownPass] => "Who threw",
            [EventKind::TouchdownRun] => "Who ran",
            _ => "Who scored",
        }
    }

    /// Identical tokens or members of one synonym group (case-insensitive).
    pub fn synonymous(&self, a: &str, b: &str) -> bool {
        if a == b {
            return true;
        }
        let la = a.to_ascii_lowercase();
        let lb = b.to_ascii_lowercase();
        la == lb || SYNONYM_GROUPS.iter().any(|g| g.contains(&la.as_str()) && g.contains(&lb.as_str()))
    }

    /// Lowercased representative of the token's synonym group.
    pub fn canonical(&self, token: &str) -> String {
        let low = token.to_ascii_lowercase();
        match SYNONYM_GROUPS.iter().find(|g| g.contains(&low.as_str())) {
            Some(g) => String::from(g[0]),
            None => low,
        }
    }

    pub fn antonym(&self, superlative: &str) -> Option<&'static str> {
        SUPERLATIVES.iter().find_map(|(a, b)| {
            if *a == superlative {
                Some(*b)
            } else if *b == superlative {
                Some(*a)
            } else {
                None
            }
        })
    }

    /// Plural form of a `find` argument: the kind phrase's head is pluralized,
    /// titles and possessives are returned unchanged.
    pub fn pluralize(&self, tokens: &[String]) -> Vec<String> {
        if let Some(i) = tokens.iter().position(|t| t == "'s") {
            let mut out = tokens[..=i].to_vec();
            out.extend(self.pluralize(&tokens[i + 1..]));
            return out;
        }
        for p in KIND_PHRASES.iter() {
            if eq_words(tokens, p.singular) || eq_words(tokens, p.plural) {
                return words(p.plural);
            }
        }
        tokens.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn clitics_round_trip() {
        let text = "How many yards was Smith's field goal?";
        let toks = t(text);
        assert_eq!(toks, words("How many yards was Smith 's field goal ?"));
        assert_eq!(detokenize(&toks), text);
        assert_eq!(detokenize(&t("Which happened first, the Battle of Dunbar or the Siege of Breda?")), "Which happened first, the Battle of Dunbar or the Siege of Breda?");
    }

    #[test]
    fn resolution() {
        let lx = Lexicon::standard();
        assert_eq!(lx.resolve_find(&t("field goals")).unwrap().kinds, vec![EventKind::FieldGoal]);
        assert_eq!(lx.resolve_find(&t("passing touchdowns")), lx.resolve_find(&t("touchdown passes")));
        let p = lx.resolve_find(&t("Smith's touchdown pass")).unwrap();
        assert_eq!(p.agent.as_deref(), Some("Smith"));
        let b = lx.resolve_find(&t("Battle of Rullion Green")).unwrap();
        assert_eq!(b.kinds, vec![EventKind::Battle]);
        assert_eq!(b.agent.as_deref(), Some("Rullion Green"));
        assert!(lx.resolve_find(&t("unicorns")).is_none());
        assert_eq!(lx.resolve_filter(&t("by Smith")), Some(Modifier::By("Smith".into())));
        assert_eq!(lx.resolve_filter(&t("in the second half")), Some(Modifier::SecondHalf));
        assert!(lx.resolve_project(&t("Who kicked")));
    }

    #[test]
    fn plurals_and_antonyms() {
        let lx = Lexicon::standard();
        assert_eq!(lx.pluralize(&t("touchdown")), t("touchdowns"));
        assert_eq!(lx.pluralize(&t("rushing touchdown")), t("rushing touchdowns"));
        assert_eq!(lx.antonym("longest"), Some("shortest"));
        assert_eq!(lx.antonym("smallest"), Some("largest"));
        assert!(lx.synonymous("passes", "passing"));
        assert!(!lx.synonymous("pass", "run"));
    }
}
