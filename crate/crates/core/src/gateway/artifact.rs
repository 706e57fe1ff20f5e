//! Canonical artifact wire format: fixed little-endian header (magic,
//! version, kind, source id) and a kind-specific body. Decoding followed by
//! re-encoding is byte-identical, which is what lets the receiving side
//! verify idempotency keys against payload digests.

use thiserror::Error;

use crate::clip::FeatureRecord;
use crate::dtw::MatchEvent;

pub const ARTIFACT_MAGIC: [u8; 4] = *b"BGA1";
pub const ARTIFACT_VERSION: u16 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ArtifactError {
    #[error("bad magic, not an artifact")]
    BadMagic,
    #[error("unsupported artifact version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported artifact kind {0}")]
    UnsupportedKind(u8),
    #[error("artifact truncated at byte {0}")]
    Truncated(usize),
    #[error("artifact field invalid: {0}")]
    Invalid(String),
}

/// What an artifact payload holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContentKind {
    Features,
    MatchIndex,
    QrsEvents,
    GzipMember,
    Raw,
}

impl ContentKind {
    pub fn code(self) -> u8 {
        match self {
            ContentKind::Features => 1,
            ContentKind::MatchIndex => 2,
            ContentKind::QrsEvents => 3,
            ContentKind::GzipMember => 4,
            ContentKind::Raw => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(ContentKind::Features),
            2 => Some(ContentKind::MatchIndex),
            3 => Some(ContentKind::QrsEvents),
            4 => Some(ContentKind::GzipMember),
            5 => Some(ContentKind::Raw),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ContentKind::Features => "features",
            ContentKind::MatchIndex => "match-index",
            ContentKind::QrsEvents => "qrs-events",
            ContentKind::GzipMember => "gzip",
            ContentKind::Raw => "raw",
        }
    }

    /// Feature extraction, pattern indices and event streams cannot be
    /// inverted back into the waveform; gzip and raw copies can.
    pub fn lossy(self) -> bool {
        matches!(
            self,
            ContentKind::Features | ContentKind::MatchIndex | ContentKind::QrsEvents
        )
    }
}

/// Kind-specific artifact payload.
#[derive(Debug, Clone, PartialEq)]
pub enum ArtifactBody {
    Features(FeatureRecord),
    MatchIndex {
        query_id: String,
        query_len: u32,
        events: Vec<MatchEvent>,
    },
    QrsEvents {
        sample_rate_hz: f64,
        fiducials: Vec<u64>,
        rr_ms: Vec<f64>,
    },
    GzipMember(Vec<u8>),
    Raw(Vec<u8>),
}

impl ArtifactBody {
    pub fn content_kind(&self) -> ContentKind {
        match self {
            ArtifactBody::Features(_) => ContentKind::Features,
            ArtifactBody::MatchIndex { .. } => ContentKind::MatchIndex,
            ArtifactBody::QrsEvents { .. } => ContentKind::QrsEvents,
            ArtifactBody::GzipMember(_) => ContentKind::GzipMember,
            ArtifactBody::Raw(_) => ContentKind::Raw,
        }
    }
}

/// The unit of uplink: one reduced payload with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionArtifact {
    pub body: ArtifactBody,
    pub source_id: String,
    pub created_at_ms: u64,
}

impl ReductionArtifact {
    pub fn new(body: ArtifactBody, source_id: impl Into<String>) -> Self {
        let created_at_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        ReductionArtifact {
            body,
            source_id: source_id.into(),
            created_at_ms,
        }
    }

    pub fn with_created_at(mut self, unix_ms: u64) -> Self {
        self.created_at_ms = unix_ms;
        self
    }

    pub fn content_kind(&self) -> ContentKind {
        self.body.content_kind()
    }

    pub fn lossy(&self) -> bool {
        self.content_kind().lossy()
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    let bytes = s.as_bytes();
    out.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
    out.extend_from_slice(bytes);
}

/// Encodes an artifact into its canonical byte form.
pub fn serialize_artifact(artifact: &ReductionArtifact) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    out.extend_from_slice(&ARTIFACT_MAGIC);
    out.extend_from_slice(&ARTIFACT_VERSION.to_le_bytes());
    out.push(artifact.content_kind().code());
    out.push(artifact.lossy() as u8);
    out.extend_from_slice(&artifact.created_at_ms.to_le_bytes());
    put_str(&mut out, &artifact.source_id);

    match &artifact.body {
        ArtifactBody::Features(f) => {
            out.extend_from_slice(&f.avg_loudness.to_le_bytes());
            let flags = u8::from(f.avg_f0_hz.is_some())
                | (u8::from(f.start_ms.is_some()) << 1)
                | (u8::from(f.end_ms.is_some()) << 2);
            out.push(flags);
            out.extend_from_slice(&f.avg_f0_hz.unwrap_or(0.0).to_le_bytes());
            out.extend_from_slice(&f.n_frames.to_le_bytes());
            out.extend_from_slice(&f.n_voiced.to_le_bytes());
            out.extend_from_slice(&f.start_ms.unwrap_or(0).to_le_bytes());
            out.extend_from_slice(&f.end_ms.unwrap_or(0).to_le_bytes());
        }
        ArtifactBody::MatchIndex {
            query_id,
            query_len,
            events,
        } => {
            put_str(&mut out, query_id);
            out.extend_from_slice(&query_len.to_le_bytes());
            out.extend_from_slice(&(events.len() as u32).to_le_bytes());
            for e in events {
                out.extend_from_slice(&(e.offset as u64).to_le_bytes());
                out.extend_from_slice(&e.distance.to_le_bytes());
            }
        }
        ArtifactBody::QrsEvents {
            sample_rate_hz,
            fiducials,
            rr_ms,
        } => {
            out.extend_from_slice(&sample_rate_hz.to_le_bytes());
            out.extend_from_slice(&(fiducials.len() as u32).to_le_bytes());
            for f in fiducials {
                out.extend_from_slice(&f.to_le_bytes());
            }
            out.extend_from_slice(&(rr_ms.len() as u32).to_le_bytes());
            for rr in rr_ms {
                out.extend_from_slice(&rr.to_le_bytes());
            }
        }
        ArtifactBody::GzipMember(bytes) | ArtifactBody::Raw(bytes) => {
            out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
            out.extend_from_slice(bytes);
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArtifactError> {
        if self.pos + n > self.buf.len() {
            return Err(ArtifactError::Truncated(self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ArtifactError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ArtifactError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ArtifactError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ArtifactError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ArtifactError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, ArtifactError> {
        let len = self.u16()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| ArtifactError::Invalid("non-UTF-8 text field".into()))
    }
}

/// Decodes the canonical byte form back into an artifact.
pub fn decode_artifact(bytes: &[u8]) -> Result<ReductionArtifact, ArtifactError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4)? != ARTIFACT_MAGIC {
        return Err(ArtifactError::BadMagic);
    }
    let version = c.u16()?;
    if version != ARTIFACT_VERSION {
        return Err(ArtifactError::UnsupportedVersion(version));
    }
    let kind =
        ContentKind::from_code(c.u8()?).ok_or_else(|| ArtifactError::UnsupportedKind(bytes[6]))?;
    let lossy = c.u8()? != 0;
    if lossy != kind.lossy() {
        return Err(ArtifactError::Invalid(format!(
            "lossy flag {lossy} contradicts kind {}",
            kind.as_str()
        )));
    }
    let created_at_ms = c.u64()?;
    let source_id = c.string()?;

    let body = match kind {
        ContentKind::Features => {
            let avg_loudness = c.f64()?;
            let flags = c.u8()?;
            let f0 = c.f64()?;
            let n_frames = c.u32()?;
            let n_voiced = c.u32()?;
            let start = c.u64()?;
            let end = c.u64()?;
            ArtifactBody::Features(FeatureRecord {
                avg_loudness,
                avg_f0_hz: (flags & 1 != 0).then_some(f0),
                n_frames,
                n_voiced,
                source_id: source_id.clone(),
                start_ms: (flags & 2 != 0).then_some(start),
                end_ms: (flags & 4 != 0).then_some(end),
            })
        }
        ContentKind::MatchIndex => {
            let query_id = c.string()?;
            let query_len = c.u32()?;
            let count = c.u32()? as usize;
            let mut events = Vec::with_capacity(count.min(1 << 20));
            for _ in 0..count {
                let offset = c.u64()? as usize;
                let distance = c.f64()?;
                events.push(MatchEvent {
                    offset,
                    length: query_len as usize,
                    distance,
                    query_id: query_id.clone(),
                });
            }
            ArtifactBody::MatchIndex {
                query_id,
                query_len,
                events,
            }
        }
        ContentKind::QrsEvents => {
            let sample_rate_hz = c.f64()?;
            let n_fid = c.u32()? as usize;
            let mut fiducials = Vec::with_capacity(n_fid.min(1 << 20));
            for _ in 0..n_fid {
                fiducials.push(c.u64()?);
            }
            let n_rr = c.u32()? as usize;
            let mut rr_ms = Vec::with_capacity(n_rr.min(1 << 20));
            for _ in 0..n_rr {
                rr_ms.push(c.f64()?);
            }
            ArtifactBody::QrsEvents {
                sample_rate_hz,
                fiducials,
                rr_ms,
            }
        }
        ContentKind::GzipMember | ContentKind::Raw => {
            let len = c.u64()? as usize;
            let payload = c.take(len)?.to_vec();
            if kind == ContentKind::GzipMember {
                ArtifactBody::GzipMember(payload)
            } else {
                ArtifactBody::Raw(payload)
            }
        }
    };
    Ok(ReductionArtifact {
        body,
        source_id,
        created_at_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn feature_artifact() -> ReductionArtifact {
        ReductionArtifact {
            body: ArtifactBody::Features(FeatureRecord {
                avg_loudness: 0.35,
                avg_f0_hz: Some(151.2),
                n_frames: 399,
                n_voiced: 312,
                source_id: "rec-01".into(),
                start_ms: Some(1_700_000_000_000),
                end_ms: Some(1_700_000_003_200),
            }),
            source_id: "rec-01".into(),
            created_at_ms: 1_700_000_004_000,
        }
    }

    #[test]
    fn feature_body_is_small() {
        let bytes = serialize_artifact(&feature_artifact());
        let header = 4 + 2 + 1 + 1 + 8 + 2 + "rec-01".len();
        assert!(
            bytes.len() - header <= 200,
            "body {} bytes",
            bytes.len() - header
        );
    }

    #[test]
    fn match_index_size_is_linear() {
        let ev = |offset| MatchEvent {
            offset,
            length: 320,
            distance: 0.25,
            query_id: "q".into(),
        };
        let sizes: Vec<usize> = [1usize, 2, 5]
            .iter()
            .map(|&k| {
                let a = ReductionArtifact {
                    body: ArtifactBody::MatchIndex {
                        query_id: "q".into(),
                        query_len: 320,
                        events: (0..k).map(|i| ev(i * 1000)).collect(),
                    },
                    source_id: "s".into(),
                    created_at_ms: 0,
                };
                serialize_artifact(&a).len()
            })
            .collect();
        assert_eq!(sizes[1] - sizes[0], 16);
        assert_eq!(sizes[2] - sizes[1], 3 * 16);
    }

    #[test]
    fn round_trip_feature_artifact() {
        let a = feature_artifact();
        let bytes = serialize_artifact(&a);
        let back = decode_artifact(&bytes).unwrap();
        assert_eq!(back, a);
        assert_eq!(serialize_artifact(&back), bytes);
    }

    #[test]
    fn decode_rejects_garbage() {
        assert_eq!(decode_artifact(b"nope"), Err(ArtifactError::BadMagic));
        assert_eq!(decode_artifact(b"xy"), Err(ArtifactError::Truncated(0)));
        assert_eq!(
            decode_artifact(b"XXXX\x01\x00\x01\x01\x00\x00\x00\x00\x00\x00\x00\x00\x00\x00"),
            Err(ArtifactError::BadMagic)
        );
        let mut bytes = serialize_artifact(&feature_artifact());
        bytes[4] = 9; // version
        assert_eq!(
            decode_artifact(&bytes),
            Err(ArtifactError::UnsupportedVersion(9))
        );
        let mut bytes = serialize_artifact(&feature_artifact());
        bytes[6] = 200; // kind
        assert_eq!(
            decode_artifact(&bytes),
            Err(ArtifactError::UnsupportedKind(200))
        );
    }

    #[test]
    fn lossy_flag_must_match_kind() {
        let mut bytes = serialize_artifact(&feature_artifact());
        bytes[7] = 0; // features are lossy; clearing the flag is a lie
        assert!(matches!(
            decode_artifact(&bytes),
            Err(ArtifactError::Invalid(_))
        ));
    }

    prop_compose! {
        fn arb_body()(sel in 0u8..5, n in 0usize..20, text in "[a-z0-9-]{0,12}",
                      x in proptest::collection::vec(-1e6f64..1e6, 0..20),
                      raw in proptest::collection::vec(any::<u8>(), 0..64))
            -> ArtifactBody
        {
            match sel {
                0 => ArtifactBody::Features(FeatureRecord {
                    avg_loudness: x.first().copied().unwrap_or(0.1).abs(),
                    avg_f0_hz: (n % 2 == 0).then_some(120.0 + n as f64),
                    n_frames: n as u32 * 3,
                    n_voiced: n as u32,
                    source_id: text.clone(),
                    start_ms: (n % 3 == 0).then_some(n as u64 * 1000),
                    end_ms: (n % 3 == 0).then_some(n as u64 * 1000 + 500),
                }),
                1 => ArtifactBody::MatchIndex {
                    query_id: text.clone(),
                    query_len: 64,
                    events: x.iter().enumerate().map(|(i, &d)| MatchEvent {
                        offset: i * 97,
                        length: 64,
                        distance: d.abs(),
                        query_id: text.clone(),
                    }).collect(),
                },
                2 => ArtifactBody::QrsEvents {
                    sample_rate_hz: 360.0,
                    fiducials: (0..n as u64).map(|i| i * 300).collect(),
                    rr_ms: x.iter().map(|v| v.abs() + 201.0).collect(),
                },
                3 => ArtifactBody::GzipMember(raw),
                _ => ArtifactBody::Raw(raw),
            }
        }
    }

    proptest! {
        #[test]
        fn decode_encode_identity(body in arb_body(), sid in "[a-z0-9/.-]{0,16}", ts in 0u64..u64::MAX / 2) {
            let source_id = match &body {
                ArtifactBody::Features(f) => f.source_id.clone(),
                _ => sid,
            };
            let a = ReductionArtifact { body, source_id, created_at_ms: ts };
            let bytes = serialize_artifact(&a);
            let back = decode_artifact(&bytes).unwrap();
            prop_assert_eq!(&back, &a);
            prop_assert_eq!(serialize_artifact(&back), bytes);
        }
    }
}
