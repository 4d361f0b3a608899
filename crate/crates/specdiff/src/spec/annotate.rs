//! Attaches a consistency policy to every leaf of each result schema.

use super::policy::{ClassifierError, ConsistencyPolicy, FieldContext, PolicyClassifier};
use super::schema::{SchemaKind, SchemaNode};
use super::ApiSpec;

/// Audit trail of annotation: which policy landed on which field path.
#[derive(Debug, Clone, Default)]
pub struct AnnotationSummary {
    /// (method, field path, policy, already annotated in the document)
    pub entries: Vec<(String, String, ConsistencyPolicy, bool)>,
}

impl AnnotationSummary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (method, path, policy, preserved) in &self.entries {
            let origin = if *preserved { "document" } else { "classifier" };
            out.push_str(&format!("{method} {path} -> {policy} ({origin})\n"));
        }
        out
    }
}

/// Labels every leaf reachable from each method's result schema. Leaves
/// already annotated in the document are preserved verbatim. Classifier
/// failure on any field aborts the whole annotation; no partial spec is
/// returned.
pub fn annotate_policies(
    spec: &ApiSpec,
    classifier: &dyn PolicyClassifier,
) -> Result<(ApiSpec, AnnotationSummary), ClassifierError> {
    let mut annotated = spec.clone();
    let mut summary = AnnotationSummary::default();
    for method in annotated.methods.values_mut() {
        let method_name = method.name.clone();
        let method_summary = method.summary.clone();
        annotate_node(
            &mut method.result,
            &method_name,
            method_summary.as_deref(),
            String::new(),
            classifier,
            &mut summary,
        )?;
    }
    Ok((annotated, summary))
}

fn annotate_node(
    node: &mut SchemaNode,
    method: &str,
    method_summary: Option<&str>,
    path: String,
    classifier: &dyn PolicyClassifier,
    summary: &mut AnnotationSummary,
) -> Result<(), ClassifierError> {
    if let Some(branches) = &mut node.any_of {
        for branch in branches {
            annotate_node(branch, method, method_summary, path.clone(), classifier, summary)?;
        }
        return Ok(());
    }
    match node.kind {
        SchemaKind::Object => {
            if let Some(properties) = &mut node.properties {
                for (name, child) in properties.iter_mut() {
                    annotate_node(
                        child,
                        method,
                        method_summary,
                        format!("{path}/{name}"),
                        classifier,
                        summary,
                    )?;
                }
            }
            Ok(())
        }
        SchemaKind::Array => {
            if let Some(items) = &mut node.items {
                annotate_node(
                    items,
                    method,
                    method_summary,
                    format!("{path}/*"),
                    classifier,
                    summary,
                )?;
            }
            Ok(())
        }
        _ => {
            let display_path = if path.is_empty() { "/".to_string() } else { path.clone() };
            if let Some(existing) = node.consistency_policy {
                summary.entries.push((method.to_string(), display_path, existing, true));
                return Ok(());
            }
            let ctx = FieldContext {
                method,
                method_summary,
                field_path: display_path.clone(),
                title: node.title.as_deref(),
                description: node.description.as_deref(),
                kind: node.kind,
            };
            let decision = classifier.classify(&ctx)?;
            node.consistency_policy = Some(decision.policy);
            if decision.environmental {
                node.environmental = true;
            }
            summary.entries.push((method.to_string(), display_path, decision.policy, false));
            Ok(())
        }
    }
}
