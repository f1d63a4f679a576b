//! High-level instruction templates.
//!
//! A template is a sentence with an `{item}` placeholder and one placeholder
//! per app role, e.g. `Listen to a podcast episode on {item} for beginners on
//! {podcast} and create a to-do list in {todo}`. Expansion substitutes every
//! chosen item and every combination of chosen apps.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::TaskCategory;

pub const ITEM_PLACEHOLDER: &str = "item";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionTemplate {
    pub template_id: String,
    pub text: String,
    pub item_pool: Vec<String>,
    /// Role name (the placeholder) to candidate apps.
    pub app_pool: BTreeMap<String, Vec<String>>,
    pub category: TaskCategory,
}

/// One concrete instruction produced from a template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionInstance {
    pub template_id: String,
    pub instruction: String,
    pub item: Option<String>,
    /// Bound apps in role order.
    pub apps: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template {template}: placeholder {{{name}}} has no pool")]
    UnboundPlaceholder { template: String, name: String },
    #[error("template {template}: unterminated placeholder")]
    Unterminated { template: String },
    #[error("template {template}: {choice:?} is not in the {pool} pool")]
    OutsidePool {
        template: String,
        pool: String,
        choice: String,
    },
    #[error("template {template}: no choices for role {role}")]
    EmptyChoice { template: String, role: String },
}

impl InstructionTemplate {
    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Result<Vec<String>, TemplateError> {
        let mut out: Vec<String> = Vec::new();
        let mut rest = self.text.as_str();
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            let close = after.find('}').ok_or_else(|| TemplateError::Unterminated {
                template: self.template_id.clone(),
            })?;
            let name = after[..close].trim().to_string();
            if !out.contains(&name) {
                out.push(name);
            }
            rest = &after[close + 1..];
        }
        Ok(out)
    }

    /// Every placeholder must be `item` (with a non-empty item pool) or a
    /// role present in the app pool.
    pub fn check(&self) -> Result<(), TemplateError> {
        for name in self.placeholders()? {
            let bound = if name == ITEM_PLACEHOLDER {
                !self.item_pool.is_empty()
            } else {
                self.app_pool.get(&name).is_some_and(|apps| !apps.is_empty())
            };
            if !bound {
                return Err(TemplateError::UnboundPlaceholder {
                    template: self.template_id.clone(),
                    name,
                });
            }
        }
        Ok(())
    }

    fn uses_item(&self) -> bool {
        self.text.contains("{item}")
    }

    /// Substitutes one item and one app per role.
    pub fn render(&self, item: Option<&str>, apps: &BTreeMap<String, String>) -> String {
        let mut text = self.text.clone();
        if let Some(item) = item {
            text = text.replace("{item}", item);
        }
        for (role, app) in apps {
            text = text.replace(&format!("{{{role}}}"), app);
        }
        text
    }
}

/// Cartesian expansion of `chosen_items` x the product of each role's
/// chosen apps. Roles are visited in name order, so instance order is
/// deterministic.
pub fn expand_template(
    template: &InstructionTemplate,
    chosen_items: &[String],
    chosen_apps: &BTreeMap<String, Vec<String>>,
) -> Result<Vec<InstructionInstance>, TemplateError> {
    template.check()?;
    let pool: BTreeSet<&String> = template.item_pool.iter().collect();
    for item in chosen_items {
        if !pool.contains(item) {
            return Err(TemplateError::OutsidePool {
                template: template.template_id.clone(),
                pool: ITEM_PLACEHOLDER.into(),
                choice: item.clone(),
            });
        }
    }
    for (role, apps) in chosen_apps {
        let allowed = template.app_pool.get(role);
        for app in apps {
            if !allowed.is_some_and(|a| a.contains(app)) {
                return Err(TemplateError::OutsidePool {
                    template: template.template_id.clone(),
                    pool: role.clone(),
                    choice: app.clone(),
                });
            }
        }
        if apps.is_empty() {
            return Err(TemplateError::EmptyChoice {
                template: template.template_id.clone(),
                role: role.clone(),
            });
        }
    }

    // all app combinations, roles in name order
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (role, apps) in chosen_apps {
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                apps.iter().map(move |app| {
                    let mut next = prefix.clone();
                    next.push((role.clone(), app.clone()));
                    next
                })
            })
            .collect();
    }

    let items: Vec<Option<&str>> = if template.uses_item() || !chosen_items.is_empty() {
        chosen_items.iter().map(|s| Some(s.as_str())).collect()
    } else {
        vec![None]
    };

    let mut out = Vec::with_capacity(items.len() * combos.len());
    for item in &items {
        for combo in &combos {
            let bound: BTreeMap<String, String> = combo.iter().cloned().collect();
            out.push(InstructionInstance {
                template_id: template.template_id.clone(),
                instruction: template.render(*item, &bound),
                item: item.map(str::to_string),
                apps: combo.iter().map(|(_, app)| app.clone()).collect(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn podcast() -> InstructionTemplate {
        InstructionTemplate {
            template_id: "T-podcast".into(),
            text: "Listen to a podcast episode on {item} for beginners on {podcast} and create a to-do list in {todo}".into(),
            item_pool: vec!["yoga".into(), "meditation".into(), "digital marketing".into()],
            app_pool: BTreeMap::from([
                ("podcast".into(), vec!["Spotify".into(), "Google Podcast".into()]),
                ("todo".into(), vec!["Todoist".into(), "Microsoft To Do".into()]),
            ]),
            category: TaskCategory::MediaEntertainment,
        }
    }

    #[test]
    fn podcast_template_expands_to_four() {
        let t = podcast();
        let apps = BTreeMap::from([
            ("podcast".into(), vec!["Spotify".into(), "Google Podcast".into()]),
            ("todo".into(), vec!["Todoist".into()]),
        ]);
        let out = expand_template(&t, &["yoga".into(), "meditation".into()], &apps).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(
            out[0].instruction,
            "Listen to a podcast episode on yoga for beginners on Spotify and create a to-do list in Todoist"
        );
        assert!(out.iter().all(|i| i.template_id == "T-podcast"));
        assert_eq!(out[3].apps, vec!["Google Podcast", "Todoist"]);
    }

    #[test]
    fn no_item_placeholder_gives_one_per_app_selection() {
        let t = InstructionTemplate {
            template_id: "T2".into(),
            text: "Check the weather in {weather} and text it with {chat}".into(),
            item_pool: vec![],
            app_pool: BTreeMap::from([
                ("weather".into(), vec!["Weather".into()]),
                ("chat".into(), vec!["WhatsApp".into(), "Signal".into(), "Telegram".into()]),
            ]),
            category: TaskCategory::GeneralTool,
        };
        let apps = t.app_pool.clone();
        assert_eq!(expand_template(&t, &[], &apps).unwrap().len(), 3);
    }

    #[test]
    fn choice_outside_pool() {
        let t = podcast();
        let apps = BTreeMap::from([("podcast".into(), vec!["Netflix".into()])]);
        assert!(matches!(
            expand_template(&t, &["yoga".into()], &apps),
            Err(TemplateError::OutsidePool { .. })
        ));
        assert!(matches!(
            expand_template(&t, &["knitting".into()], &BTreeMap::new()),
            Err(TemplateError::OutsidePool { .. })
        ));
    }

    #[test]
    fn unbound_placeholder() {
        let mut t = podcast();
        t.text.push_str(" via {mail}");
        assert!(matches!(t.check(), Err(TemplateError::UnboundPlaceholder { .. })));
    }

    proptest! {
        #[test]
        fn instance_count_is_product(n_items in 1usize..5, sizes in proptest::collection::vec(1usize..4, 0..4)) {
            let items: Vec<String> = (0..n_items).map(|i| format!("item{i}")).collect();
            let mut pool = BTreeMap::new();
            let mut text = String::from("do {item}");
            for (r, size) in sizes.iter().enumerate() {
                let role = format!("r{r}");
                text.push_str(&format!(" with {{{role}}}"));
                pool.insert(role, (0..*size).map(|a| format!("app{r}_{a}")).collect::<Vec<_>>());
            }
            let t = InstructionTemplate {
                template_id: "T".into(),
                text,
                item_pool: items.clone(),
                app_pool: pool.clone(),
                category: TaskCategory::MultiApps,
            };
            let out = expand_template(&t, &items, &pool).unwrap();
            let expected = n_items * sizes.iter().product::<usize>();
            prop_assert_eq!(out.len(), expected);
        }
    }
}
