//! Application categories, their locator shapes, and the detachable map that
//! assigns applications to categories.
//!
//! The map is a plain-text table so it can be shipped and updated separately
//! from the engine:
//!
//! ```text
//! # comment
//! version 3
//! com.google.chrome*<TAB>web_browser<TAB>Page URL
//! com.microsoft.word<TAB>document_editor<TAB>File Directory
//! ```

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use glob::{MatchOptions, Pattern};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::AppSnapshot;

pub const LABEL_PAGE_URL: &str = "Page URL";
pub const LABEL_FILE_DIRECTORY: &str = "File Directory";
pub const LABEL_PROJECT: &str = "Project";
pub const LABEL_APPLICATION: &str = "Application";

/// Map shipped with the engine, used when no override is configured.
pub const DEFAULT_CATEGORY_MAP: &str = include_str!("../data/categories.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppCategory {
    WebBrowser,
    DocumentEditor,
    ProjectBased,
    NoMetadata,
}

impl AppCategory {
    pub const ALL: [AppCategory; 4] = [
        AppCategory::WebBrowser,
        AppCategory::DocumentEditor,
        AppCategory::ProjectBased,
        AppCategory::NoMetadata,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AppCategory::WebBrowser => "web_browser",
            AppCategory::DocumentEditor => "document_editor",
            AppCategory::ProjectBased => "project_based",
            AppCategory::NoMetadata => "no_metadata",
        }
    }

    /// Label shown next to the locator when a rule does not override it.
    pub fn default_label(self) -> &'static str {
        match self {
            AppCategory::WebBrowser => LABEL_PAGE_URL,
            AppCategory::DocumentEditor => LABEL_FILE_DIRECTORY,
            AppCategory::ProjectBased => LABEL_PROJECT,
            AppCategory::NoMetadata => LABEL_APPLICATION,
        }
    }

    /// Labels fixed for a category, if any. Maps may not relabel these.
    fn required_label(self) -> Option<&'static str> {
        match self {
            AppCategory::WebBrowser => Some(LABEL_PAGE_URL),
            AppCategory::DocumentEditor => Some(LABEL_FILE_DIRECTORY),
            _ => None,
        }
    }
}

impl fmt::Display for AppCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AppCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AppCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// The category-appropriate handle for reopening what a frame shows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Locator {
    Web { url: String, title: String },
    File { path: String, name: String },
    Project { root: String },
    None,
}

impl Locator {
    /// Empty locator with the shape used by `category`.
    pub fn empty_for(category: AppCategory) -> Self {
        match category {
            AppCategory::WebBrowser => Locator::Web {
                url: String::new(),
                title: String::new(),
            },
            AppCategory::DocumentEditor => Locator::File {
                path: String::new(),
                name: String::new(),
            },
            AppCategory::ProjectBased => Locator::Project {
                root: String::new(),
            },
            AppCategory::NoMetadata => Locator::None,
        }
    }

    /// The primary reopenable value: URL, file path, or project root.
    pub fn target(&self) -> &str {
        match self {
            Locator::Web { url, .. } => url,
            Locator::File { path, .. } => path,
            Locator::Project { root } => root,
            Locator::None => "",
        }
    }

    pub fn is_empty(&self) -> bool {
        self.target().is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct CategoryRule {
    pattern: Pattern,
    pub category: AppCategory,
    pub label: String,
}

impl CategoryRule {
    pub fn new(pattern: &str, category: AppCategory, label: impl Into<String>) -> Result<Self, MapError> {
        let label = label.into();
        check_label(category, &label).map_err(|reason| MapError::Malformed { line: 0, reason })?;
        let pattern = Pattern::new(&pattern.to_lowercase()).map_err(|e| MapError::Malformed {
            line: 0,
            reason: format!("bad pattern {pattern:?}: {e}"),
        })?;
        Ok(Self {
            pattern,
            category,
            label,
        })
    }

    pub fn pattern(&self) -> &str {
        self.pattern.as_str()
    }

    pub fn matches(&self, app_id: &str) -> bool {
        const OPTS: MatchOptions = MatchOptions {
            case_sensitive: false,
            require_literal_separator: false,
            require_literal_leading_dot: false,
        };
        self.pattern.matches_with(app_id, OPTS)
    }
}

fn check_label(category: AppCategory, label: &str) -> Result<(), String> {
    if label.is_empty() {
        return Err("empty label".to_owned());
    }
    match category.required_label() {
        Some(required) if required != label => Err(format!(
            "category {category} must use label {required:?}, found {label:?}"
        )),
        _ => Ok(()),
    }
}

/// Ordered rule list; the first matching rule wins.
#[derive(Debug, Clone, Default)]
pub struct CategoryMap {
    pub version: u32,
    rules: Vec<CategoryRule>,
}

impl CategoryMap {
    pub fn new(version: u32, rules: Vec<CategoryRule>) -> Self {
        Self { version, rules }
    }

    pub fn rules(&self) -> &[CategoryRule] {
        &self.rules
    }

    /// The map shipped in [`DEFAULT_CATEGORY_MAP`].
    pub fn builtin() -> Self {
        load_category_map(DEFAULT_CATEGORY_MAP)
            .expect("built-in category map parses")
            .map
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub category: AppCategory,
    pub label: String,
}

/// Category and display label of the first rule matching `app_id`, or
/// `(no_metadata, "Application")` when none matches.
pub fn classify(map: &CategoryMap, app_id: &str) -> Classification {
    map.rules
        .iter()
        .find(|rule| rule.matches(app_id))
        .map(|rule| Classification {
            category: rule.category,
            label: rule.label.clone(),
        })
        .unwrap_or_else(|| Classification {
            category: AppCategory::NoMetadata,
            label: LABEL_APPLICATION.to_owned(),
        })
}

/// Projects the category-appropriate locator out of a snapshot. Missing fields
/// give an empty locator of the right shape.
pub fn extract_locator(category: AppCategory, snapshot: &AppSnapshot) -> Locator {
    let field = |v: &Option<String>| v.clone().unwrap_or_default();
    match category {
        AppCategory::WebBrowser => Locator::Web {
            url: field(&snapshot.url),
            title: snapshot
                .page_title
                .clone()
                .or_else(|| snapshot.window_title.clone())
                .unwrap_or_default(),
        },
        AppCategory::DocumentEditor => match snapshot.file_path.as_deref() {
            Some(path) if !path.is_empty() => Locator::File {
                path: path.to_owned(),
                name: Path::new(path)
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            },
            _ => Locator::empty_for(category),
        },
        AppCategory::ProjectBased => Locator::Project {
            root: field(&snapshot.project_root),
        },
        AppCategory::NoMetadata => Locator::None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("malformed category map at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("reading category map: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapWarning {
    /// The same pattern appears twice; the earlier rule is kept.
    DuplicateRule {
        pattern: String,
        first_line: usize,
        line: usize,
    },
}

impl fmt::Display for MapWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapWarning::DuplicateRule {
                pattern,
                first_line,
                line,
            } => write!(
                f,
                "line {line}: pattern {pattern:?} already defined at line {first_line}; ignored"
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedMap {
    pub map: CategoryMap,
    pub warnings: Vec<MapWarning>,
}

/// Parses a category map document. An empty document yields an empty map.
pub fn load_category_map(text: &str) -> Result<LoadedMap, MapError> {
    let mut version = None;
    let mut rules = Vec::new();
    let mut seen: Vec<(String, usize)> = Vec::new();
    let mut warnings = Vec::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let malformed = |reason: String| MapError::Malformed {
            line: line_no,
            reason,
        };

        if version.is_none() {
            let v = line
                .trim()
                .strip_prefix("version")
                .filter(|rest| rest.starts_with(char::is_whitespace))
                .ok_or_else(|| malformed("expected `version <int>` header".to_owned()))?;
            version = Some(
                v.trim()
                    .parse::<u32>()
                    .map_err(|e| malformed(format!("bad version: {e}")))?,
            );
            continue;
        }

        let fields: Vec<&str> = line.split('\t').collect();
        let [pattern, category, label] = fields[..] else {
            return Err(malformed(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        };
        let category: AppCategory = category.trim().parse().map_err(malformed)?;
        let label = label.trim();
        let pattern = pattern.trim();
        if pattern.is_empty() {
            return Err(malformed("empty pattern".to_owned()));
        }
        check_label(category, label).map_err(malformed)?;

        let key = pattern.to_lowercase();
        if let Some((_, first_line)) = seen.iter().find(|(p, _)| *p == key) {
            warnings.push(MapWarning::DuplicateRule {
                pattern: pattern.to_owned(),
                first_line: *first_line,
                line: line_no,
            });
            continue;
        }
        seen.push((key.clone(), line_no));

        let matcher = Pattern::new(&key).map_err(|e| malformed(format!("bad pattern: {e}")))?;
        rules.push(CategoryRule {
            pattern: matcher,
            category,
            label: label.to_owned(),
        });
    }

    for w in &warnings {
        tracing::warn!("{w}");
    }
    Ok(LoadedMap {
        map: CategoryMap {
            version: version.unwrap_or(0),
            rules,
        },
        warnings,
    })
}

pub fn load_category_map_from(mut source: impl Read) -> Result<LoadedMap, MapError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| MapError::Io(e.to_string()))?;
    load_category_map(&text)
}
