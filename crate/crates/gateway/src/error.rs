#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] adapterd_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server answered {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed stream: {0}")]
    Protocol(String),
    #[error("engine task stopped")]
    EngineGone,
}

pub type Result<T> = std::result::Result<T, Error>;
