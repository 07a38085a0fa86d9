//! Line-delimited JSON over TCP.
//!
//! Each request is one line `{"id": "name#3", "dialect": "postgis", "query": "..."}`.
//! The peer answers with one line, either `{"columns": [...], "rows": [[...]]}`,
//! `{"row_count": n}` for servers that do not return payloads, or
//! `{"error": "..."}`. A thin proxy in front of a real database is enough to
//! benchmark it.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Adapter, AdapterError, Session, Workload};
use crate::model::{ResultSet, Value};
use crate::queryspec::QueryInstance;

const CONNECT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Serialize)]
struct Request<'a> {
    id: String,
    dialect: &'a str,
    query: String,
}

#[derive(Deserialize)]
struct Response {
    #[serde(default)]
    columns: Option<Vec<String>>,
    #[serde(default)]
    rows: Vec<Vec<serde_json::Value>>,
    #[serde(default)]
    row_count: Option<u64>,
    #[serde(default)]
    error: Option<String>,
}

pub struct SqlWireAdapter {
    addr: String,
    dialect: String,
    capture: bool,
    workload: Arc<Workload>,
}

impl SqlWireAdapter {
    /// `connection` is `host:port`, optionally followed by `;capture=false`.
    pub fn new(connection: String, dialect: String, workload: Arc<Workload>) -> Self {
        let mut parts = connection.split(';');
        let addr = parts.next().unwrap_or("").trim().trim_start_matches("tcp://").to_string();
        let capture = !parts.any(|p| p.trim() == "capture=false");
        SqlWireAdapter { addr, dialect, capture, workload }
    }
}

fn to_value(v: serde_json::Value) -> Value {
    match v {
        serde_json::Value::Null => Value::Null,
        serde_json::Value::Bool(b) => Value::Int(b as i64),
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(i) => Value::Int(i),
            None => Value::Float(n.as_f64().unwrap_or(f64::NAN)),
        },
        serde_json::Value::String(s) => Value::Text(s),
        other => Value::Text(other.to_string()),
    }
}

struct WireSession<'a> {
    adapter: &'a SqlWireAdapter,
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    line: String,
}

impl Session for WireSession<'_> {
    fn execute(&mut self, qi: &QueryInstance) -> Result<ResultSet, AdapterError> {
        let a = self.adapter;
        let ps = a
            .workload
            .param_set(qi)
            .ok_or_else(|| AdapterError::Query(format!("no parameter set {}", qi.key())))?;
        let query = a
            .workload
            .registry
            .render(&qi.template, &a.dialect, ps)
            .map_err(|e| AdapterError::Query(e.to_string()))?;
        let req = Request { id: qi.key(), dialect: &a.dialect, query };
        let conn = |e: std::io::Error| AdapterError::Connection(e.to_string());
        serde_json::to_writer(&mut self.writer, &req).map_err(|e| AdapterError::Connection(e.to_string()))?;
        self.writer.write_all(b"\n").map_err(conn)?;
        self.writer.flush().map_err(conn)?;
        self.line.clear();
        if self.reader.read_line(&mut self.line).map_err(conn)? == 0 {
            return Err(AdapterError::Connection("server closed the connection".into()));
        }
        let resp: Response =
            serde_json::from_str(&self.line).map_err(|e| AdapterError::Query(format!("bad response: {e}")))?;
        if let Some(err) = resp.error {
            return Err(AdapterError::Query(err));
        }
        let mut rs = ResultSet { columns: resp.columns.unwrap_or_default(), rows: Vec::new() };
        if a.capture {
            rs.rows = resp.rows.into_iter().map(|r| r.into_iter().map(to_value).collect()).collect();
        }
        if rs.rows.is_empty() {
            // payload-free answers still report their size
            let n = resp.row_count.unwrap_or(0);
            rs.rows = (0..n).map(|_| Vec::new()).collect();
        }
        Ok(rs)
    }
}

impl Adapter for SqlWireAdapter {
    fn id(&self) -> &str {
        "sqlwire"
    }

    fn dialect(&self) -> &str {
        &self.dialect
    }

    fn captures_results(&self) -> bool {
        self.capture
    }

    fn session(&self) -> Result<Box<dyn Session + '_>, AdapterError> {
        let conn = |e: std::io::Error| AdapterError::Connection(format!("{}: {e}", self.addr));
        let addr = self
            .addr
            .to_socket_addrs()
            .map_err(conn)?
            .next()
            .ok_or_else(|| AdapterError::Connection(format!("{}: no address", self.addr)))?;
        let stream = TcpStream::connect_timeout(&addr, CONNECT_TIMEOUT).map_err(conn)?;
        stream.set_nodelay(true).map_err(conn)?;
        let reader = BufReader::new(stream.try_clone().map_err(conn)?);
        Ok(Box::new(WireSession { adapter: self, reader, writer: BufWriter::new(stream), line: String::new() }))
    }
}
