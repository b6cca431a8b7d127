use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;

use crate::knowledge::Chunk;

use super::grammar::parse_plan_text;
use super::{plan_hash, PlanError, TroubleshootingPlan};

/// Text in, text out. Implementations wrap whatever model serves plans.
#[async_trait]
pub trait TextCompletion: Send + Sync {
    async fn complete(&self, prompt: &str) -> Result<String, String>;
}

/// Treats a completion model as an untrusted source of plan text: each call
/// is bounded by a timeout and retried once, and the output must parse.
#[derive(Clone)]
pub struct ModelPlanBackend {
    client: Arc<dyn TextCompletion>,
    timeout: Duration,
}

impl ModelPlanBackend {
    pub fn new(client: Arc<dyn TextCompletion>, timeout: Duration) -> Self {
        Self { client, timeout }
    }

    pub fn prompt(intent: &str, chunks: &[Chunk]) -> String {
        let mut p = String::from(
            "You write stepwise network troubleshooting plans. Reason inside <think></think>, \
             then answer inside <answer></answer> with one <step n=\"k\">Title: details</step> \
             per step, numbered from 1. Use only counters, alarms and commands that appear in \
             the context.\n\nContext:\n",
        );
        for c in chunks {
            p.push_str(&format!("[{}]\n{}\n\n", c.chunk_id, c.text));
        }
        p.push_str(&format!("Question: {intent}\n"));
        p
    }

    async fn attempt(&self, prompt: &str) -> Result<String, PlanError> {
        match tokio::time::timeout(self.timeout, self.client.complete(prompt)).await {
            Ok(Ok(text)) => Ok(text),
            Ok(Err(reason)) => Err(PlanError::ModelUnavailable { reason }),
            Err(_) => Err(PlanError::ModelUnavailable {
                reason: format!("no completion within {} ms", self.timeout.as_millis()),
            }),
        }
    }

    pub async fn generate(
        &self,
        intent: &str,
        chunks: &[Chunk],
    ) -> Result<TroubleshootingPlan, PlanError> {
        if chunks.is_empty() {
            return Err(PlanError::NoChunks);
        }
        let prompt = Self::prompt(intent, chunks);
        let text = match self.attempt(&prompt).await {
            Ok(t) => t,
            Err(_) => self.attempt(&prompt).await?,
        };
        let mut plan = parse_plan_text(&text)?;
        plan.plan_id = format!("model-{}", plan_hash(&[intent, &text]));
        plan.intent_ref = intent.to_string();
        plan.source_chunks = chunks.iter().map(|c| c.chunk_id.clone()).collect();
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Flaky {
        calls: AtomicUsize,
        fail_first: usize,
        reply: String,
    }

    #[async_trait]
    impl TextCompletion for Flaky {
        async fn complete(&self, _prompt: &str) -> Result<String, String> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err("overloaded".into())
            } else {
                Ok(self.reply.clone())
            }
        }
    }

    fn chunk() -> Chunk {
        Chunk {
            chunk_id: "c#0000".into(),
            doc_id: "c".into(),
            ordinal: 0,
            text: "x".into(),
            token_count: 1,
            token_offset: 0,
        }
    }

    fn flaky(fail_first: usize, reply: &str) -> Arc<Flaky> {
        Arc::new(Flaky {
            calls: AtomicUsize::new(0),
            fail_first,
            reply: reply.into(),
        })
    }

    #[tokio::test]
    async fn one_retry() {
        let ok = "<think>t</think><answer><step n=\"1\">Escalate: call Targets: none</step></answer>";
        let client = flaky(1, ok);
        let backend = ModelPlanBackend::new(client.clone(), Duration::from_secs(1));
        let plan = backend.generate("q", &[chunk()]).await.unwrap();
        assert_eq!(plan.steps.len(), 1);
        assert_eq!(client.calls.load(Ordering::SeqCst), 2);

        let client = flaky(2, ok);
        let backend = ModelPlanBackend::new(client.clone(), Duration::from_secs(1));
        assert!(matches!(
            backend.generate("q", &[chunk()]).await,
            Err(PlanError::ModelUnavailable { .. })
        ));
    }

    #[tokio::test]
    async fn unparseable_output_is_rejected() {
        let backend = ModelPlanBackend::new(flaky(0, "Sure! Step 1: reboot."), Duration::from_secs(1));
        assert!(matches!(
            backend.generate("q", &[chunk()]).await,
            Err(PlanError::MalformedTags { .. })
        ));
    }
}
