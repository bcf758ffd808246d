//! Prompt templates, shipped as versioned assets compiled into the binary.
//! Placeholders use `{name}` and are substituted with [`fill`].

pub const PROMPT_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy)]
pub struct PromptTemplates {
    pub file_localization: &'static str,
    pub element_localization: &'static str,
    pub edit_localization: &'static str,
    pub repair: &'static str,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            file_localization: include_str!("../assets/prompts/v1/file_localization.txt"),
            element_localization: include_str!("../assets/prompts/v1/element_localization.txt"),
            edit_localization: include_str!("../assets/prompts/v1/edit_localization.txt"),
            repair: include_str!("../assets/prompts/v1/repair.txt"),
        }
    }
}

pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_substitutes_all_placeholders() {
        let text = fill("a {x} b {y} c {x}", &[("x", "1"), ("y", "2")]);
        assert_eq!(text, "a 1 b 2 c 1");
    }

    #[test]
    fn builtin_templates_declare_their_placeholders() {
        let t = PromptTemplates::default();
        for (template, vars) in [
            (t.file_localization, vec!["issue_title", "issue_body", "structure", "top_n"]),
            (t.element_localization, vec!["issue_title", "issue_body", "skeletons"]),
            (t.edit_localization, vec!["issue_title", "issue_body", "contexts"]),
            (t.repair, vec!["issue_title", "issue_body", "contexts"]),
        ] {
            for var in vars {
                assert!(
                    template.contains(&format!("{{{var}}}")),
                    "template missing {{{var}}}"
                );
            }
        }
    }
}
