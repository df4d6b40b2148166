//! Line-oriented transports: one JSON frame per line in each direction.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use super::{Gateway, SmsFrame};

/// Serves frames from `input` until EOF, writing replies to `output`.
/// Malformed lines get an error frame addressed to nobody.
pub fn serve_lines<R: BufRead, W: Write>(gateway: &Gateway, input: R, mut output: W) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let replies = match serde_json::from_str::<SmsFrame>(&line) {
            Ok(frame) => match gateway.handle_frame(&frame) {
                Ok(out) => out,
                Err(e) => vec![SmsFrame::outbound(&frame.msisdn, format!("Error: {e}"), frame.ts)],
            },
            Err(e) => vec![SmsFrame::outbound("", format!("Error: bad frame: {e}"), 0)],
        };
        for r in replies {
            serde_json::to_writer(&mut output, &r)?;
            output.write_all(b"\n")?;
        }
        output.flush()?;
    }
    Ok(())
}

fn serve_connection(gateway: &Gateway, stream: TcpStream) -> io::Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    serve_lines(gateway, reader, stream)
}

/// Accepts connections forever, one thread per connection.
pub fn serve_tcp(gateway: Arc<Gateway>, listener: TcpListener) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let gw = Arc::clone(&gateway);
        thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            if let Err(e) = serve_connection(&gw, stream) {
                eprintln!("connection {peer:?}: {e}");
            }
        });
    }
    Ok(())
}
