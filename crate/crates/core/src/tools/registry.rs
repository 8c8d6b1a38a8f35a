use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::{MockTool, Tool, ToolContext, ToolError, ToolLimits};
use crate::action::{ActionArgs, ActionKind, Observation};
use crate::cost::CostModel;
use crate::retrieval::RetrievalConfig;
use crate::scene::Scene;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("ANSWER is terminal and cannot be bound to a tool")]
    AnswerNotBindable,
    #[error("registry is missing tools for {0:?}")]
    Incomplete(Vec<ActionKind>),
}

/// Maps each tool kind to its backend. Shareable across concurrently running episodes.
#[derive(Clone)]
pub struct ToolRegistry {
    bindings: BTreeMap<ActionKind, Arc<dyn Tool>>,
    cost_model: CostModel,
    retrieval: RetrievalConfig,
    limits: ToolLimits,
}

impl fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToolRegistry")
            .field("bound", &self.bindings.keys().collect::<Vec<_>>())
            .field("cost_model", &self.cost_model)
            .field("limits", &self.limits)
            .finish()
    }
}

impl ToolRegistry {
    /// An empty registry.
    pub fn new(cost_model: CostModel, retrieval: RetrievalConfig, limits: ToolLimits) -> Self {
        Self { bindings: BTreeMap::new(), cost_model, retrieval, limits }
    }

    /// Every tool backed by the scene simulator.
    pub fn mock(cost_model: CostModel) -> Self {
        let mut r = Self::new(cost_model, RetrievalConfig::default(), ToolLimits::default());
        let mock: Arc<dyn Tool> = Arc::new(MockTool);
        for kind in ActionKind::TOOLS {
            r.bindings.insert(kind, Arc::clone(&mock));
        }
        r
    }

    /// Replaces the backend for `kind`.
    pub fn bind(&mut self, kind: ActionKind, tool: Arc<dyn Tool>) -> Result<&mut Self, RegistryError> {
        if kind == ActionKind::Answer {
            return Err(RegistryError::AnswerNotBindable);
        }
        self.bindings.insert(kind, tool);
        Ok(self)
    }

    pub fn ensure_complete(&self) -> Result<(), RegistryError> {
        let missing: Vec<ActionKind> =
            ActionKind::TOOLS.into_iter().filter(|k| !self.bindings.contains_key(k)).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(RegistryError::Incomplete(missing))
        }
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost_model
    }

    pub fn retrieval(&self) -> &RetrievalConfig {
        &self.retrieval
    }

    pub fn limits(&self) -> &ToolLimits {
        &self.limits
    }

    pub fn context(&self) -> ToolContext<'_> {
        ToolContext { cost_model: &self.cost_model, retrieval: &self.retrieval, limits: &self.limits }
    }

    pub fn dispatch(&self, args: &ActionArgs, scene: &Scene) -> Result<Observation, ToolError> {
        self.dispatch_with(args, scene, &self.cost_model)
    }

    /// Dispatches with an episode's own cost model in place of the registry default.
    pub fn dispatch_with(
        &self,
        args: &ActionArgs,
        scene: &Scene,
        cost_model: &CostModel,
    ) -> Result<Observation, ToolError> {
        let kind = args.kind();
        let tool = self.bindings.get(&kind).ok_or(ToolError::Unbound(kind))?;
        let ctx = ToolContext { cost_model, retrieval: &self.retrieval, limits: &self.limits };
        tool.call(args, scene, &ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::test_support::kitten;
    use crate::tools::DenseCaptionTool;

    #[test]
    fn mock_registry_is_complete() {
        let r = ToolRegistry::mock(CostModel::default());
        r.ensure_complete().unwrap();
    }

    #[test]
    fn answer_cannot_be_bound() {
        let mut r = ToolRegistry::mock(CostModel::default());
        assert_eq!(r.bind(ActionKind::Answer, Arc::new(MockTool)).unwrap_err(), RegistryError::AnswerNotBindable);
    }

    #[test]
    fn empty_registry_reports_missing() {
        let r = ToolRegistry::new(CostModel::default(), RetrievalConfig::default(), ToolLimits::default());
        assert_eq!(r.ensure_complete(), Err(RegistryError::Incomplete(ActionKind::TOOLS.to_vec())));
        let err = r.dispatch(&ActionArgs::Asr {}, &kitten()).unwrap_err();
        assert_eq!(err, ToolError::Unbound(ActionKind::Asr));
    }

    #[test]
    fn rebinding_swaps_backend() {
        let mut r = ToolRegistry::mock(CostModel::default());
        r.bind(ActionKind::GlobalQa, Arc::new(DenseCaptionTool)).unwrap();
        let o = r.dispatch(&ActionArgs::GlobalQa { question: "x".into() }, &kitten()).unwrap();
        assert_eq!(o.cost.visual, 15000);
    }

    #[test]
    fn answer_dispatch_is_unbound() {
        let r = ToolRegistry::mock(CostModel::default());
        let err = r.dispatch(&ActionArgs::Answer { answer: "A".into() }, &kitten()).unwrap_err();
        assert_eq!(err, ToolError::Unbound(ActionKind::Answer));
    }
}
