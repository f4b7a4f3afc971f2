use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use scatterquery_core::service::{
    build_collection, execute_query, load_collection, load_dataset, save_collection, ApiError,
    CollectionRequest, QueryRef, QueryRequest, QueryResponse, Registry, ServiceConfig,
};
use scatterquery_core::{Point, TopK};

#[derive(Debug, Parser)]
#[command(
    name = "scatterquery",
    version,
    about = "Search scatterplot collections"
)]
pub struct Cli {
    /// JSON config file; falls back to $SCATTERQUERY_CONFIG, then defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Build a collection from a CSV file and write it to a directory.
    Build(BuildArgs),
    /// Query a collection written by `build`.
    Query(QueryArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    /// Collection directories to publish at startup.
    #[arg(long = "load", value_name = "DIR")]
    pub load: Vec<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("mode").required(true))]
pub struct BuildArgs {
    pub csv: PathBuf,
    /// Every pair of measures.
    #[arg(long, group = "mode")]
    pub pairwise: bool,
    /// One plot of x against y per value of cat.
    #[arg(long, group = "mode", value_name = "X,Y,CAT")]
    pub category: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("kind").required(true))]
pub struct QueryArgs {
    pub dir: PathBuf,
    /// Polygon in unit-square coordinates: inline JSON or a file. Accepts a
    /// GeoJSON Polygon or Feature, a ring list, or a bare vertex list.
    #[arg(long, group = "kind", value_name = "GEOJSON")]
    pub region: Option<String>,
    /// Spec id of a plot in the collection.
    #[arg(long, group = "kind", value_name = "SPEC_ID")]
    pub like: Option<String>,
    /// Number of results, or "all".
    #[arg(long)]
    pub k: Option<String>,
    /// Score region queries by fraction of points instead of count.
    #[arg(long)]
    pub normalized: bool,
    /// Print the full response as JSON.
    #[arg(long)]
    pub json: bool,
}

pub fn load_config(path: Option<&Path>) -> Result<ServiceConfig, ApiError> {
    Ok(match path {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::from_env()?,
    })
}

fn invalid(message: impl Into<String>) -> ApiError {
    ApiError::new("invalid-request", message)
}

fn io_error(path: &Path, e: std::io::Error) -> ApiError {
    ApiError::new("io-error", format!("{}: {e}", path.display()))
}

pub fn parse_k(raw: &str) -> Result<TopK, ApiError> {
    match raw {
        "all" => Ok(TopK::ALL),
        n => match n.parse::<usize>() {
            Ok(k) if k > 0 => Ok(TopK::Count(k)),
            _ => Err(invalid(format!(
                "k must be a positive integer or \"all\", got `{raw}`"
            ))),
        },
    }
}

fn coords(v: &Value) -> Option<Vec<Point>> {
    v.as_array()?
        .iter()
        .map(|p| match p.as_array()?.as_slice() {
            [x, y] => Some(Point::new(x.as_f64()?, y.as_f64()?)),
            _ => None,
        })
        .collect()
}

/// Reads the outer ring of a polygon given in any of the accepted shapes.
/// Polygons with holes are refused.
pub fn parse_polygon(raw: &str) -> Result<Vec<Point>, ApiError> {
    let text = match serde_json::from_str::<Value>(raw) {
        Ok(_) => raw.to_string(),
        Err(_) => std::fs::read_to_string(raw).map_err(|e| io_error(Path::new(raw), e))?,
    };
    let mut v: Value = serde_json::from_str(&text)
        .map_err(|e| ApiError::new("invalid-json", format!("region: {e}")))?;
    if v.get("type").and_then(Value::as_str) == Some("Feature") {
        v = v["geometry"].take();
    }
    if let Some(kind) = v.get("type").and_then(Value::as_str) {
        if kind != "Polygon" {
            return Err(ApiError::new(
                "invalid-region",
                format!("expected a Polygon geometry, got {kind}"),
            ));
        }
        v = v["coordinates"].take();
    }
    if let Some(points) = coords(&v) {
        return Ok(points);
    }
    let rings = v
        .as_array()
        .ok_or_else(|| ApiError::new("invalid-region", "region must be a coordinate array"))?;
    match rings.as_slice() {
        [outer] => coords(outer),
        [] => None,
        _ => {
            return Err(ApiError::new(
                "invalid-region",
                "polygons with holes are not supported",
            ))
        }
    }
    .ok_or_else(|| ApiError::new("invalid-region", "vertices must be [x, y] number pairs"))
}

pub fn build(args: &BuildArgs, cfg: &ServiceConfig) -> Result<String, ApiError> {
    let csv = std::fs::read(&args.csv).map_err(|e| io_error(&args.csv, e))?;
    let dataset = load_dataset(&csv, cfg)?;
    let request = match &args.category {
        Some(spec) => match spec
            .split(',')
            .map(str::trim)
            .collect::<Vec<_>>()
            .as_slice()
        {
            [x, y, cat] => CollectionRequest::category_split(x, y, cat),
            _ => return Err(invalid("--category expects X,Y,CAT")),
        },
        None => CollectionRequest::pairwise(),
    };
    let collection = build_collection(&dataset, &request, cfg)?;
    save_collection(&args.out, &csv, &dataset, &request, &collection, cfg)?;
    let empty = collection.entries().iter().filter(|e| e.is_empty()).count();
    let mut out = format!(
        "collection {} with {} plots written to {}",
        collection.id(),
        collection.len(),
        args.out.display()
    );
    if empty > 0 {
        write!(out, " ({empty} empty)").unwrap();
    }
    Ok(out)
}

pub fn query_request(args: &QueryArgs) -> Result<QueryRequest, ApiError> {
    let k = args.k.as_deref().map(parse_k).transpose()?;
    Ok(match (&args.region, &args.like) {
        (Some(region), None) => QueryRequest::Region {
            polygon: parse_polygon(region)?,
            k,
            normalized: args.normalized,
        },
        (None, Some(spec)) => QueryRequest::Similar {
            reference: QueryRef::Spec(spec.clone()),
            k,
            weights: None,
            prune_threshold: None,
        },
        _ => return Err(invalid("give exactly one of --region or --like")),
    })
}

pub fn query(args: &QueryArgs, cfg: &ServiceConfig) -> Result<QueryResponse, ApiError> {
    let req = query_request(args)?;
    let stored = load_collection(&args.dir)?;
    execute_query(&stored.collection, &req, cfg)
}

pub fn render_table(resp: &QueryResponse) -> String {
    let mut out = format!("{:>4}  {:>12}  spec\n", "rank", "score");
    for r in &resp.results {
        writeln!(out, "{:>4}  {:>12.6}  {}", r.rank, r.score.value, r.spec_id).unwrap();
    }
    out
}

pub async fn serve(args: &ServeArgs, mut cfg: ServiceConfig) -> Result<(), ApiError> {
    if let Some(bind) = &args.bind {
        cfg.bind = bind.clone();
    }
    if let Some(port) = args.port {
        cfg.port = port;
    }
    let addr: SocketAddr = format!("{}:{}", cfg.bind, cfg.port)
        .parse()
        .map_err(|e| invalid(format!("bind address: {e}")))?;
    let registry = Arc::new(Registry::new(cfg));
    for dir in &args.load {
        let stored = load_collection(dir)?;
        let c = registry.insert_collection(stored.collection);
        eprintln!("loaded collection {} ({} plots)", c.id(), c.len());
    }
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ApiError::new("io-error", format!("bind {addr}: {e}")))?;
    eprintln!("listening on http://{addr}");
    axum::serve(listener, crate::router(registry))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ApiError::new("io-error", e.to_string()))
}
