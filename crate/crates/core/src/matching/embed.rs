use std::time::Duration;

use serde::Deserialize;

use super::MatchError;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provider_id: String,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn scaled(&self, factor: f64) -> EmbeddingVector {
        EmbeddingVector {
            values: self.values.iter().map(|v| v * factor).collect(),
            provider_id: self.provider_id.clone(),
        }
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;

    /// Same text, same vector.
    fn embed(&self, text: &str) -> Result<EmbeddingVector, MatchError>;
}

/// `dot(a, b) / (|a| |b|)`, clamped to [-1, 1].
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, MatchError> {
    if a.dim() != b.dim() {
        return Err(MatchError::DimensionMismatch(a.dim(), b.dim()));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(&a.values), norm(&b.values));
    if na == 0.0 || nb == 0.0 {
        return Err(MatchError::ZeroVector);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Offline provider: character trigrams of `" " + lowercase(text) + " "`,
/// hashed (FNV-1a) into `dim` buckets, L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct MockTrigramProvider {
    dim: usize,
}

impl Default for MockTrigramProvider {
    fn default() -> Self {
        MockTrigramProvider { dim: 256 }
    }
}

impl MockTrigramProvider {
    pub fn new(dim: usize) -> Self {
        MockTrigramProvider { dim: dim.max(1) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl EmbeddingProvider for MockTrigramProvider {
    fn id(&self) -> &str {
        "mock-trigram"
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, MatchError> {
        if text.is_empty() {
            return Err(MatchError::EmptyText);
        }
        let padded: Vec<char> = format!(" {} ", text.to_lowercase()).chars().collect();
        let mut values = vec![0.0; self.dim];
        let mut buf = String::new();
        for w in padded.windows(3) {
            buf.clear();
            buf.extend(w);
            values[(fnv1a(buf.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(EmbeddingVector {
            values,
            provider_id: self.id().to_string(),
        })
    }
}

/// JSON-over-HTTP provider.
///
/// Request `{"model", "texts": [..]}`; response either `{"vectors": [[..]]}`
/// or `{"token_vectors": [[[..]]]}`, the latter mean-pooled per text.
pub struct HttpEmbedding {
    endpoint: String,
    model: String,
    token: Option<String>,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct Reply {
    vectors: Option<Vec<Vec<f64>>>,
    token_vectors: Option<Vec<Vec<Vec<f64>>>>,
}

fn mean_pool(tokens: &[Vec<f64>]) -> Option<Vec<f64>> {
    let first = tokens.first()?;
    let mut acc = vec![0.0; first.len()];
    for t in tokens {
        if t.len() != acc.len() {
            return None;
        }
        acc.iter_mut().zip(t).for_each(|(a, v)| *a += v);
    }
    let n = tokens.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Some(acc)
}

impl HttpEmbedding {
    pub const TOKEN_VAR: &'static str = "PAE_EMBED_TOKEN";

    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, token: Option<String>) -> Self {
        HttpEmbedding {
            endpoint: endpoint.into(),
            model: model.into(),
            token,
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build(),
        }
    }

    pub fn from_env(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        HttpEmbedding::new(endpoint, model, std::env::var(Self::TOKEN_VAR).ok())
    }

    pub fn embed_many(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, MatchError> {
        if texts.iter().any(|t| t.is_empty()) {
            return Err(MatchError::EmptyText);
        }
        let mut call = self.agent.post(&self.endpoint);
        if let Some(t) = &self.token {
            call = call.set("Authorization", &format!("Bearer {t}"));
        }
        let reply: Reply = call
            .send_json(serde_json::json!({ "model": self.model, "texts": texts }))
            .map_err(|e| MatchError::ProviderUnavailable(e.to_string()))?
            .into_json()
            .map_err(|e| MatchError::ProviderUnavailable(format!("unreadable response: {e}")))?;
        let vectors = match (reply.vectors, reply.token_vectors) {
            (Some(v), _) => v,
            (None, Some(tv)) => tv
                .iter()
                .map(|t| mean_pool(t))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| MatchError::ProviderUnavailable("ragged token vectors".into()))?,
            (None, None) => return Err(MatchError::ProviderUnavailable("response has no vectors".into())),
        };
        if vectors.len() != texts.len() {
            return Err(MatchError::ProviderUnavailable(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                vectors.len()
            )));
        }
        Ok(vectors
            .into_iter()
            .map(|values| EmbeddingVector {
                values,
                provider_id: format!("http:{}", self.model),
            })
            .collect())
    }
}

impl EmbeddingProvider for HttpEmbedding {
    fn id(&self) -> &str {
        "http"
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, MatchError> {
        Ok(self.embed_many(&[text])?.remove(0))
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    use super::*;

    fn v(x: &[f64]) -> EmbeddingVector {
        EmbeddingVector {
            values: x.to_vec(),
            provider_id: "t".into(),
        }
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&v(&[1.0, 2.0, 2.0]), &v(&[2.0, 1.0, 2.0])).unwrap() - 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let a = v(&[0.3, -1.7, 2.2]);
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            cosine_similarity(&v(&[1.0]), &v(&[1.0, 0.0])),
            Err(MatchError::DimensionMismatch(1, 2))
        ));
        assert!(matches!(cosine_similarity(&v(&[0.0, 0.0, 0.0]), &a), Err(MatchError::ZeroVector)));
    }

    #[test]
    fn mock_is_deterministic_and_normalized() {
        let p = MockTrigramProvider::default();
        let a = p.embed("V-Neck").unwrap();
        assert_eq!(a, p.embed("V-Neck").unwrap());
        assert_eq!(a.dim(), 256);
        let norm: f64 = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(matches!(p.embed(""), Err(MatchError::EmptyText)));
        assert!(p.embed("a").unwrap().values.iter().any(|x| *x > 0.0));
    }

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64-bit test vectors.
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn pooling() {
        assert_eq!(mean_pool(&[vec![1.0, 2.0], vec![3.0, 4.0]]), Some(vec![2.0, 3.0]));
        assert_eq!(mean_pool(&[vec![1.0], vec![3.0, 4.0]]), None);
        assert_eq!(mean_pool(&[]), None);
    }

    fn serve_once(body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/embed", listener.local_addr().unwrap());
        let h = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut r = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                r.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; len];
            r.read_exact(&mut buf).unwrap();
            let mut s = stream;
            write!(
                s,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            String::from_utf8(buf).unwrap()
        });
        (url, h)
    }

    #[test]
    fn http_token_vectors_are_mean_pooled() {
        let (url, h) = serve_once(r#"{"token_vectors": [[[1.0, 0.0], [0.0, 1.0]]]}"#);
        let p = HttpEmbedding::new(url, "bert-base-uncased", None);
        let e = p.embed("V-Neck").unwrap();
        assert_eq!(e.values, vec![0.5, 0.5]);
        let sent: serde_json::Value = serde_json::from_str(&h.join().unwrap()).unwrap();
        assert_eq!(sent["texts"][0], "V-Neck");
        assert_eq!(sent["model"], "bert-base-uncased");
    }

    #[test]
    fn http_unreachable() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/embed", listener.local_addr().unwrap());
        drop(listener);
        let p = HttpEmbedding::new(url, "m", None);
        assert!(matches!(p.embed("x"), Err(MatchError::ProviderUnavailable(_))));
    }
}
