//! Socket mode: 4-byte big-endian length, then a UTF-8 JSON body.

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{AgentCommand, AgentReply};

/// Frames above this size are rejected.
pub const MAX_FRAME: u32 = 16 * 1024 * 1024;

pub fn write_frame<W: Write, T: Serialize>(w: &mut W, msg: &T) -> io::Result<()> {
    let body = serde_json::to_vec(msg).map_err(io::Error::other)?;
    let len = u32::try_from(body.len())
        .ok()
        .filter(|l| *l <= MAX_FRAME)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()
}

/// Reads one frame; `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read, T: DeserializeOwned>(r: &mut R) -> io::Result<Option<T>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame too large"));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    serde_json::from_slice(&body)
        .map(Some)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// Answers commands on one connection until the peer hangs up.
pub fn serve_connection<F>(stream: &mut TcpStream, handler: &mut F) -> io::Result<usize>
where
    F: FnMut(AgentCommand) -> AgentReply,
{
    let mut served = 0;
    while let Some(cmd) = read_frame::<_, AgentCommand>(stream)? {
        write_frame(stream, &handler(cmd))?;
        served += 1;
    }
    Ok(served)
}

/// Serves connections one after another, forever.
pub fn serve<F>(listener: TcpListener, mut handler: F) -> io::Result<()>
where
    F: FnMut(AgentCommand) -> AgentReply,
{
    for stream in listener.incoming() {
        let mut stream = stream?;
        if let Err(e) = serve_connection(&mut stream, &mut handler) {
            if e.kind() != io::ErrorKind::InvalidData {
                return Err(e);
            }
        }
    }
    Ok(())
}

pub struct AgentClient {
    stream: TcpStream,
}

impl AgentClient {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(AgentClient { stream })
    }

    pub fn send(&mut self, command: &AgentCommand) -> io::Result<AgentReply> {
        write_frame(&mut self.stream, command)?;
        read_frame(&mut self.stream)?
            .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "agent closed the connection"))
    }
}
