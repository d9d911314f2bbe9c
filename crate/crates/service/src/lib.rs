//! HTTP service for interactive synapse counting.
//!
//! A session holds one red and one green channel. Clients attach a traced
//! dendrite, ask for previews under candidate intensity bands and finally
//! persist a report with an overlay image. Sessions live in memory and are
//! dropped after an idle timeout.

mod error;
mod overlay;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::multipart::MultipartRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use neurotopo_core::image::pnm::{decode, ChannelTag, DecodeOptions};
use neurotopo_core::image::{band_threshold, label_components, Connectivity};
use neurotopo_core::pipelines::{count_synapses, IntensityRange, PipelineError, RoiPolyline};
use neurotopo_core::{BinaryImage, GrayImage};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

pub use error::{ApiError, ErrorBody};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Sessions untouched for this long are dropped.
    pub idle_timeout: Duration,
    /// Finalized reports and overlays are written here.
    pub report_dir: PathBuf,
    pub max_upload_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            idle_timeout: Duration::from_secs(30 * 60),
            report_dir: PathBuf::from("reports"),
            max_upload_bytes: 64 << 20,
        }
    }
}

/// Red and green bands of one preview.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranges {
    pub red: IntensityRange,
    pub green: IntensityRange,
}

struct Session {
    red: Arc<GrayImage>,
    green: Arc<GrayImage>,
    calibration: Option<f64>,
    roi: Option<RoiPolyline>,
    last: Option<Ranges>,
    created_at: u64,
    last_access: Instant,
}

/// Everything a computation needs, copied out under the session lock.
struct Snapshot {
    red: Arc<GrayImage>,
    green: Arc<GrayImage>,
    calibration: Option<f64>,
    roi: Option<RoiPolyline>,
    last: Option<Ranges>,
    created_at: u64,
}

struct Inner {
    config: ServiceConfig,
    sessions: Mutex<HashMap<Uuid, Arc<Mutex<Session>>>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                config,
                sessions: Mutex::new(HashMap::new()),
            }),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    /// Drops idle sessions and returns how many remain.
    pub fn purge_idle(&self) -> usize {
        let timeout = self.inner.config.idle_timeout;
        let mut sessions = lock(&self.inner.sessions);
        sessions.retain(|_, s| lock(s).last_access.elapsed() < timeout);
        sessions.len()
    }

    /// Purges idle sessions periodically on the current runtime.
    pub fn spawn_reaper(&self) -> tokio::task::JoinHandle<()> {
        let state = self.clone();
        let period = (self.inner.config.idle_timeout / 4).max(Duration::from_millis(100));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                state.purge_idle();
            }
        })
    }

    fn insert(&self, session: Session) -> Uuid {
        self.purge_idle();
        let mut sessions = lock(&self.inner.sessions);
        let mut id = Uuid::new_v4();
        while sessions.contains_key(&id) {
            id = Uuid::new_v4();
        }
        sessions.insert(id, Arc::new(Mutex::new(session)));
        id
    }

    fn session(&self, id: &str) -> Result<(Uuid, Arc<Mutex<Session>>), ApiError> {
        let unknown = || ApiError::not_found(format!("no session '{id}'"));
        let uuid = Uuid::parse_str(id).map_err(|_| unknown())?;
        self.purge_idle();
        let s = lock(&self.inner.sessions).get(&uuid).cloned().ok_or_else(unknown)?;
        lock(&s).last_access = Instant::now();
        Ok((uuid, s))
    }

    fn snapshot(&self, id: &str) -> Result<(Uuid, Arc<Mutex<Session>>, Snapshot), ApiError> {
        let (uuid, s) = self.session(id)?;
        let snap = {
            let g = lock(&s);
            Snapshot {
                red: g.red.clone(),
                green: g.green.clone(),
                calibration: g.calibration,
                roi: g.roi.clone(),
                last: g.last,
                created_at: g.created_at,
            }
        };
        Ok((uuid, s, snap))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: Uuid,
    pub width: usize,
    pub height: usize,
    pub calibration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiAccepted {
    #[serde(flatten)]
    pub roi: RoiPolyline,
    pub length_px: f64,
    pub length_um: Option<f64>,
}

/// Counts and the marked mask as horizontal runs `[y, x_start, x_end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preview {
    pub count: usize,
    pub dendrite_length_um: Option<f64>,
    pub density_per_100um: Option<f64>,
    pub calibration: Option<f64>,
    pub red_range: IntensityRange,
    pub green_range: IntensityRange,
    /// Whether the count is restricted to the dendrite band.
    pub within_roi: bool,
    pub width: usize,
    pub height: usize,
    pub spans: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finalized {
    #[serde(flatten)]
    pub preview: Preview,
    pub report_path: PathBuf,
    pub overlay_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredReport {
    pub session: Uuid,
    pub created_at: u64,
    pub finalized_at: u64,
    pub roi: RoiPolyline,
    #[serde(flatten)]
    pub preview: Preview,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub sessions: usize,
}

/// Marks and counts synapses. Without a dendrite the whole field counts
/// and no length or density is reported.
pub fn compute_preview(
    red: &GrayImage,
    green: &GrayImage,
    roi: Option<&RoiPolyline>,
    calibration: Option<f64>,
    ranges: Ranges,
) -> Result<(Preview, BinaryImage), ApiError> {
    let (width, height) = red.dimensions();
    let (count, marked, length_um) = match roi {
        Some(roi) => {
            let report = count_synapses(red, green, roi, ranges.red, ranges.green, calibration.unwrap_or(1.0))
                .map_err(pipeline_error)?;
            let marked = report.marked.expect("count_synapses returns its mask");
            (report.count, marked, calibration.map(|_| report.dendrite_length_um))
        }
        None => {
            let marked = band_threshold(red, ranges.red.lo, ranges.red.hi)
                .and_then(|r| r.and(&band_threshold(green, ranges.green.lo, ranges.green.hi)?))
                .map_err(|e| ApiError::internal(e.to_string()))?;
            let count = label_components(&marked, Connectivity::Eight).count() as usize;
            (count, marked, None)
        }
    };
    let spans = marked.runs().into_iter().map(|(y, a, b)| [y, a, b]).collect();
    let preview = Preview {
        count,
        dendrite_length_um: length_um,
        density_per_100um: length_um.map(|l| 100.0 * count as f64 / l),
        calibration,
        red_range: ranges.red,
        green_range: ranges.green,
        within_roi: roi.is_some(),
        width,
        height,
        spans,
    };
    Ok((preview, marked))
}

fn pipeline_error(e: PipelineError) -> ApiError {
    match e {
        PipelineError::InvalidRange(r) => ApiError::unprocessable("invalid-range", format!("invalid range {r}")),
        PipelineError::TooFewVertices
        | PipelineError::BandWidth(_)
        | PipelineError::ZeroLengthRoi
        | PipelineError::EmptyRoi => ApiError::unprocessable("invalid-roi", e.to_string()),
        other => ApiError::internal(other.to_string()),
    }
}

pub fn router(state: AppState) -> Router {
    let limit = state.config().max_upload_bytes;
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/roi", post(set_roi))
        .route("/sessions/{id}/preview", get(preview))
        .route("/sessions/{id}/finalize", post(finalize))
        .fallback(|| async { ApiError::not_found("no such route") })
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        sessions: state.purge_idle(),
    })
}

fn decode_channel(field: &str, bytes: &[u8], tag: ChannelTag) -> Result<GrayImage, ApiError> {
    let img = decode(bytes, DecodeOptions::default())
        .map_err(|e| ApiError::bad_request("malformed-image", format!("{field}: {e}")))?;
    Ok(match img.channel(tag) {
        Some(ch) => ch.clone(),
        None => img.into_gray(),
    })
}

async fn create_session(
    State(state): State<AppState>,
    multipart: Result<Multipart, MultipartRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let mut multipart = multipart.map_err(|e| ApiError::bad_request("malformed-upload", e.body_text()))?;
    let (mut red, mut green, mut calibration) = (None, None, None);
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request("malformed-upload", e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_request("malformed-upload", e.body_text()))?;
        match name.as_str() {
            "red" => red = Some(decode_channel("red", &bytes, ChannelTag::Red)?),
            "green" => green = Some(decode_channel("green", &bytes, ChannelTag::Green)?),
            "calibration" => {
                let text = String::from_utf8_lossy(&bytes);
                let c: f64 = text
                    .trim()
                    .parse()
                    .ok()
                    .filter(|c: &f64| *c > 0.0 && c.is_finite())
                    .ok_or_else(|| {
                        ApiError::bad_request(
                            "invalid-calibration",
                            format!("calibration '{text}' is not a positive number"),
                        )
                    })?;
                calibration = Some(c);
            }
            _ => {}
        }
    }
    let red = red.ok_or_else(|| ApiError::bad_request("missing-channel", "the 'red' image is required"))?;
    let green = green.ok_or_else(|| ApiError::bad_request("missing-channel", "the 'green' image is required"))?;
    red.same_dimensions(&green)
        .map_err(|e| ApiError::bad_request("dimension-mismatch", e.to_string()))?;
    let calibration = calibration.or(red.calibration());
    let (width, height) = red.dimensions();
    let id = state.insert(Session {
        red: Arc::new(red),
        green: Arc::new(green),
        calibration,
        roi: None,
        last: None,
        created_at: unix_now(),
        last_access: Instant::now(),
    });
    Ok((
        StatusCode::CREATED,
        Json(Created {
            id,
            width,
            height,
            calibration,
        }),
    ))
}

async fn set_roi(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<RoiAccepted>, ApiError> {
    let (_, session) = state.session(&id)?;
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::unprocessable("invalid-roi", "body is not UTF-8"))?;
    let roi = RoiPolyline::from_json(text).map_err(|e| ApiError::unprocessable("invalid-roi", e.to_string()))?;
    let mut s = lock(&session);
    let (w, h) = s.red.dimensions();
    if roi.length_px() <= 0.0 {
        return Err(pipeline_error(PipelineError::ZeroLengthRoi));
    }
    if roi.rasterize(w, h).is_empty() {
        return Err(pipeline_error(PipelineError::EmptyRoi));
    }
    let accepted = RoiAccepted {
        length_px: roi.length_px(),
        length_um: s.calibration.map(|c| roi.length_um(c)),
        roi: roi.clone(),
    };
    s.roi = Some(roi);
    Ok(Json(accepted))
}

fn parse_ranges(q: &HashMap<String, String>) -> Result<Ranges, ApiError> {
    let value = |key: &str, default: u8| -> Result<u8, ApiError> {
        match q.get(key) {
            None => Ok(default),
            Some(v) => v.trim().parse().map_err(|_| {
                ApiError::unprocessable(
                    "invalid-range",
                    format!("{key} must be an integer in 0..=255, got '{v}'"),
                )
            }),
        }
    };
    let band = |lo: &str, hi: &str| -> Result<IntensityRange, ApiError> {
        IntensityRange::new(value(lo, 0)?, value(hi, 255)?).map_err(pipeline_error)
    };
    Ok(Ranges {
        red: band("redLo", "redHi")?,
        green: band("greenLo", "greenHi")?,
    })
}

async fn run_blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn preview(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Json<Preview>, ApiError> {
    let (_, session, snap) = state.snapshot(&id)?;
    let ranges = parse_ranges(&query)?;
    let (preview, _) =
        run_blocking(move || compute_preview(&snap.red, &snap.green, snap.roi.as_ref(), snap.calibration, ranges))
            .await?;
    lock(&session).last = Some(ranges);
    Ok(Json(preview))
}

async fn finalize(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Finalized>, ApiError> {
    let (uuid, _, snap) = state.snapshot(&id)?;
    let roi = snap
        .roi
        .clone()
        .ok_or_else(|| ApiError::conflict("roi-missing", "trace a dendrite before finalizing"))?;
    let ranges = snap
        .last
        .ok_or_else(|| ApiError::conflict("parameters-missing", "request a preview before finalizing"))?;
    let dir = state.config().report_dir.clone();
    let finalized = run_blocking(move || {
        let (preview, marked) = compute_preview(&snap.red, &snap.green, Some(&roi), snap.calibration, ranges)?;
        let io = |e: std::io::Error| ApiError::internal(format!("cannot write report: {e}"));
        std::fs::create_dir_all(&dir).map_err(io)?;
        let report_path = dir.join(format!("{uuid}.json"));
        let overlay_path = dir.join(format!("{uuid}.png"));
        let stored = StoredReport {
            session: uuid,
            created_at: snap.created_at,
            finalized_at: unix_now(),
            roi: roi.clone(),
            preview: preview.clone(),
        };
        let json = serde_json::to_string_pretty(&stored).map_err(|e| ApiError::internal(e.to_string()))?;
        std::fs::write(&report_path, json).map_err(io)?;
        let band = roi.rasterize(snap.red.width(), snap.red.height());
        overlay::render(&snap.red, &snap.green, &band, &marked)
            .save_with_format(&overlay_path, image::ImageFormat::Png)
            .map_err(|e| ApiError::internal(format!("cannot write overlay: {e}")))?;
        Ok(Finalized {
            preview,
            report_path,
            overlay_path,
        })
    })
    .await?;
    Ok(Json(finalized))
}
