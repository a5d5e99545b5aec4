//! One fully assembled recommender for a training window: graph, content,
//! decayed weights, trust and transition matrix.

use std::collections::BTreeSet;

use crate::enrich::{attach_content, effective_weights, EdgeWeights};
use crate::error::{Error, Result};
use crate::graph::{self, RecGraph};
use crate::ppr::{
    densify, personalization_vector, power_iteration, top_n, PprSettings, RankVector,
    TransitionMatrix,
};
use crate::stream::{ContentCatalog, ExplicitTrustNetwork, ItemId, LinkStream, Timestamp, UserId};
use crate::trust::{explicit_trust, implicit_trust, TrustKind, TrustModel};

pub struct Recommender {
    settings: PprSettings,
    graph: RecGraph,
    weights: EdgeWeights,
    matrix: TransitionMatrix,
    trust: TrustModel,
}

impl Recommender {
    /// Builds everything from `train`, with edge ages measured at `now`.
    pub fn build(
        train: &LinkStream,
        catalog: &ContentCatalog,
        explicit: Option<&ExplicitTrustNetwork>,
        settings: &PprSettings,
        now: Timestamp,
    ) -> Result<Self> {
        settings.validate()?;
        let basic = graph::build(settings.graph, train, settings.delta)?;
        let graph = attach_content(basic, catalog, settings.content)?;
        let weights = effective_weights(&graph, now, &settings.decay_spec())?;
        let matrix = crate::ppr::transition_matrix(&graph, &weights);
        let trust = match settings.trust {
            TrustKind::None => TrustModel::none(),
            TrustKind::Et => {
                let net = explicit.ok_or_else(|| {
                    Error::validation("trust", "explicit trust needs a trust network file")
                })?;
                explicit_trust(net, train.users())
            }
            TrustKind::It => implicit_trust(train, settings.min_overlap),
        };
        Ok(Recommender {
            settings: *settings,
            graph,
            weights,
            matrix,
            trust,
        })
    }

    pub fn settings(&self) -> &PprSettings {
        &self.settings
    }

    pub fn graph(&self) -> &RecGraph {
        &self.graph
    }

    pub fn weights(&self) -> &EdgeWeights {
        &self.weights
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }

    pub fn trust(&self) -> &TrustModel {
        &self.trust
    }

    pub fn restart(&self, user: UserId) -> Result<Vec<(usize, f64)>> {
        personalization_vector(&self.graph, &self.settings, user, &self.trust)
    }

    pub fn rank(&self, user: UserId) -> Result<RankVector> {
        let d = densify(&self.restart(user)?, self.graph.node_count());
        Ok(power_iteration(
            &self.matrix,
            &d,
            self.settings.alpha,
            self.settings.tol,
            self.settings.max_iter,
        ))
    }

    /// Top `n` items outside `seen`. Fails with [`Error::ColdUser`] when the
    /// user has no restart node.
    pub fn recommend(
        &self,
        user: UserId,
        seen: &BTreeSet<ItemId>,
        n: usize,
    ) -> Result<Vec<(ItemId, f64)>> {
        let pr = self.rank(user)?;
        Ok(top_n(&pr.scores, &self.graph, seen, n))
    }
}
