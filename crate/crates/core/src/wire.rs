//! Binary encodings: length-prefixed frames, queries, answers, and the
//! dealer's export files. Integers are little-endian; bit strings are packed
//! MSB-first with zero padding. Decoders never panic on malformed input.

use std::io::{Read, Write};

use thiserror::Error;

use crate::bits::BitString;
use crate::client::{ChunkRef, QueryItem};
use crate::dealer::{CommonRandomness, MessageDatabase, Token, TOKEN_LEN};
use crate::message::{Chunk, CoefficientVector, Message};
use crate::params::SystemParams;
use crate::policy::{AccessPolicy, Attribute, TypeId};
use crate::server::{Answer, Rejection};

pub const MAX_PAYLOAD: usize = 1 << 24;
pub const FILE_MAGIC: &[u8; 6] = b"DAPAC1";
pub const TAG_DATABASE: u8 = 0x01;
pub const TAG_SHARES: u8 = 0x02;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("truncated input: needed {needed} more bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("bad frame kind 0x{0:02x}")]
    BadKind(u8),
    #[error("length {0} exceeds the frame limit")]
    LengthOverflow(usize),
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid encoding: {0}")]
    Invalid(String),
}

impl WireError {
    /// Stable numeric code, also carried in error frames.
    pub fn code(&self) -> u8 {
        match self {
            WireError::Truncated { .. } => 1,
            WireError::BadKind(_) => 2,
            WireError::LengthOverflow(_) => 3,
            WireError::TrailingBytes(_) => 4,
            WireError::Invalid(_) => 5,
        }
    }
}

type WireResult<T> = std::result::Result<T, WireError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameKind {
    Query = 0x01,
    Answer = 0x02,
    Reject = 0x03,
    CredentialCheck = 0x04,
    Error = 0x05,
}

impl FrameKind {
    pub fn from_byte(b: u8) -> WireResult<Self> {
        Ok(match b {
            0x01 => FrameKind::Query,
            0x02 => FrameKind::Answer,
            0x03 => FrameKind::Reject,
            0x04 => FrameKind::CredentialCheck,
            0x05 => FrameKind::Error,
            other => return Err(WireError::BadKind(other)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: FrameKind, payload: Vec<u8>) -> Self {
        Self { kind, payload }
    }

    pub fn encode(&self) -> WireResult<Vec<u8>> {
        if self.payload.len() > MAX_PAYLOAD {
            return Err(WireError::LengthOverflow(self.payload.len()));
        }
        let mut out = Vec::with_capacity(5 + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32 + 1).to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> WireResult<Self> {
        let mut r = Reader::new(bytes);
        let length = r.u32()? as usize;
        check_frame_length(length)?;
        let kind = FrameKind::from_byte(r.u8()?)?;
        let payload = r.take(length - 1)?.to_vec();
        r.finish()?;
        Ok(Self { kind, payload })
    }

    /// Reads one frame from a stream; short reads surface as truncation.
    pub fn read_from(stream: &mut impl Read) -> std::io::Result<WireResult<Self>> {
        let mut header = [0u8; 4];
        if let Err(e) = stream.read_exact(&mut header) {
            return truncated_or(e, 4);
        }
        let length = u32::from_le_bytes(header) as usize;
        if let Err(e) = check_frame_length(length) {
            return Ok(Err(e));
        }
        let mut body = vec![0u8; length];
        if let Err(e) = stream.read_exact(&mut body) {
            return truncated_or(e, length);
        }
        Ok(FrameKind::from_byte(body[0]).map(|kind| Frame {
            kind,
            payload: body[1..].to_vec(),
        }))
    }

    pub fn write_to(&self, stream: &mut impl Write) -> std::io::Result<()> {
        let bytes = self
            .encode()
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
        stream.write_all(&bytes)?;
        stream.flush()
    }
}

fn truncated_or<T>(e: std::io::Error, needed: usize) -> std::io::Result<WireResult<T>> {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Ok(Err(WireError::Truncated { needed, available: 0 }))
    } else {
        Err(e)
    }
}

fn check_frame_length(length: usize) -> WireResult<()> {
    if length == 0 {
        return Err(WireError::Invalid("zero frame length".into()));
    }
    if length > MAX_PAYLOAD + 1 {
        return Err(WireError::LengthOverflow(length));
    }
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> WireResult<&'a [u8]> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(WireError::Truncated { needed: n, available });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> WireResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> WireResult<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> WireResult<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn bits(&mut self, len: usize) -> WireResult<BitString> {
        let bytes = self.take(len.div_ceil(8))?;
        BitString::from_bytes(bytes, len).map_err(|e| WireError::Invalid(e.to_string()))
    }

    fn finish(self) -> WireResult<()> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            extra => Err(WireError::TrailingBytes(extra)),
        }
    }
}

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Query as it travels: the bearer token and the items, nothing else.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireQuery {
    pub token: Token,
    pub items: Vec<QueryItem>,
}

pub fn encode_query(token: &Token, items: &[QueryItem]) -> WireResult<Vec<u8>> {
    let count = u16::try_from(items.len()).map_err(|_| WireError::LengthOverflow(items.len()))?;
    let mut out = Vec::new();
    out.extend_from_slice(&token.0);
    put_u16(&mut out, count);
    for item in items {
        for attr in [item.type_id.first(), item.type_id.second()] {
            out.push(attr.pos);
            put_u16(&mut out, attr.value);
        }
        out.extend_from_slice(&item.coeffs.bits().to_bytes());
        for r in &item.refs {
            for &v in r.policy.values() {
                put_u16(&mut out, v);
            }
            put_u16(&mut out, r.chunk);
        }
    }
    Ok(out)
}

/// Item layout is fixed by `params`; a reference list shorter or longer
/// than a type is therefore not representable and shows up as a framing
/// error. Policy values are passed through unchecked so the server can
/// reject them with its own reason code.
pub fn decode_query(bytes: &[u8], params: &SystemParams) -> WireResult<WireQuery> {
    let mut r = Reader::new(bytes);
    let mut token = [0u8; TOKEN_LEN];
    token.copy_from_slice(r.take(TOKEN_LEN)?);
    let count = r.u16()? as usize;
    let type_size = params.type_size();
    let mut items = Vec::with_capacity(count.min(bytes.len()));
    for _ in 0..count {
        let a = Attribute { pos: r.u8()?, value: r.u16()? };
        let b = Attribute { pos: r.u8()?, value: r.u16()? };
        let type_id = TypeId::new(a, b, params).map_err(|e| WireError::Invalid(e.to_string()))?;
        if (type_id.first(), type_id.second()) != (a, b) {
            return Err(WireError::Invalid("type label not in canonical order".into()));
        }
        let coeffs = CoefficientVector::new(r.bits(type_size)?, type_size).expect("length checked");
        let mut refs = Vec::with_capacity(type_size);
        for _ in 0..type_size {
            let values = (0..params.n_servers()).map(|_| r.u16()).collect::<WireResult<Vec<_>>>()?;
            refs.push(ChunkRef {
                policy: AccessPolicy::from_raw(values),
                chunk: r.u16()?,
            });
        }
        items.push(QueryItem { type_id, coeffs, refs });
    }
    r.finish()?;
    Ok(WireQuery {
        token: Token(token),
        items,
    })
}

pub fn encode_answer_items(items: &[Chunk]) -> WireResult<Vec<u8>> {
    let count = u16::try_from(items.len()).map_err(|_| WireError::LengthOverflow(items.len()))?;
    let mut out = Vec::new();
    put_u16(&mut out, count);
    for c in items {
        out.extend_from_slice(&c.bits().to_bytes());
    }
    Ok(out)
}

pub fn decode_answer_items(bytes: &[u8], params: &SystemParams) -> WireResult<Vec<Chunk>> {
    let mut r = Reader::new(bytes);
    let count = r.u16()? as usize;
    let c = params.chunk_len_bits();
    let mut items = Vec::with_capacity(count.min(bytes.len()));
    for _ in 0..count {
        items.push(Chunk::new(r.bits(c)?, c).expect("length checked"));
    }
    r.finish()?;
    Ok(items)
}

/// Answer or reject frame for an [`Answer`].
pub fn answer_frame(answer: &Answer) -> WireResult<Frame> {
    Ok(match answer {
        Answer::Items(items) => Frame::new(FrameKind::Answer, encode_answer_items(items)?),
        Answer::Rejected(r) => Frame::new(FrameKind::Reject, vec![r.code()]),
    })
}

/// Inverse of [`answer_frame`]. Error frames decode to `Err(Invalid)`.
pub fn answer_from_frame(frame: &Frame, params: &SystemParams) -> WireResult<Answer> {
    match frame.kind {
        FrameKind::Answer => Ok(Answer::Items(decode_answer_items(&frame.payload, params)?)),
        FrameKind::Reject => {
            let mut r = Reader::new(&frame.payload);
            let code = r.u8()?;
            r.finish()?;
            Rejection::from_code(code)
                .map(Answer::Rejected)
                .ok_or_else(|| WireError::Invalid(format!("unknown rejection code {code}")))
        }
        FrameKind::Error => Err(WireError::Invalid(format!(
            "server error: {}",
            String::from_utf8_lossy(&frame.payload)
        ))),
        other => Err(WireError::BadKind(other as u8)),
    }
}

fn put_header(out: &mut Vec<u8>, tag: u8, params: &SystemParams) {
    out.extend_from_slice(FILE_MAGIC);
    out.push(tag);
    put_u32(out, params.n_servers() as u32);
    put_u32(out, params.n_values() as u32);
    put_u32(out, params.msg_len_bits() as u32);
}

fn read_header(r: &mut Reader<'_>, tag: u8) -> WireResult<SystemParams> {
    if r.take(FILE_MAGIC.len())? != FILE_MAGIC {
        return Err(WireError::Invalid("bad file magic".into()));
    }
    let got = r.u8()?;
    if got != tag {
        return Err(WireError::Invalid(format!("file tag 0x{got:02x}, expected 0x{tag:02x}")));
    }
    let (n, k, l) = (r.u32()?, r.u32()?, r.u32()?);
    SystemParams::new(n as usize, k as usize, l as usize).map_err(|e| WireError::Invalid(e.to_string()))
}

/// Messages in policy-index order, then pads in canonical type order.
pub fn encode_database(db: &MessageDatabase, pads: &CommonRandomness) -> Vec<u8> {
    let mut out = Vec::new();
    put_header(&mut out, TAG_DATABASE, db.params());
    for m in db.messages() {
        out.extend_from_slice(&m.bits().to_bytes());
    }
    for p in pads.pads() {
        out.extend_from_slice(&p.bits().to_bytes());
    }
    out
}

pub fn decode_database(bytes: &[u8]) -> WireResult<(MessageDatabase, CommonRandomness)> {
    let mut r = Reader::new(bytes);
    let params = read_header(&mut r, TAG_DATABASE)?;
    let l = params.msg_len_bits();
    let c = params.chunk_len_bits();
    let messages = (0..params.n_policies())
        .map(|_| Ok(Message::new(r.bits(l)?, l).expect("length checked")))
        .collect::<WireResult<Vec<_>>>()?;
    let pads = (0..params.n_types())
        .map(|_| Ok(Chunk::new(r.bits(c)?, c).expect("length checked")))
        .collect::<WireResult<Vec<_>>>()?;
    r.finish()?;
    let invalid = |e: crate::error::Error| WireError::Invalid(e.to_string());
    Ok((
        MessageDatabase::from_messages(params, messages).map_err(invalid)?,
        CommonRandomness::from_pads(params, pads).map_err(invalid)?,
    ))
}

/// Shares grouped by server, each group in policy-index order.
pub fn encode_shares(params: &SystemParams, shares: &[Vec<Message>]) -> Vec<u8> {
    let mut out = Vec::new();
    put_header(&mut out, TAG_SHARES, params);
    for m in shares.iter().flatten() {
        out.extend_from_slice(&m.bits().to_bytes());
    }
    out
}

pub fn decode_shares(bytes: &[u8]) -> WireResult<(SystemParams, Vec<Vec<Message>>)> {
    let mut r = Reader::new(bytes);
    let params = read_header(&mut r, TAG_SHARES)?;
    let l = params.msg_len_bits();
    let mut shares = Vec::with_capacity(params.n_servers());
    for _ in 0..params.n_servers() {
        let group = (0..params.n_policies())
            .map(|_| Ok(Message::new(r.bits(l)?, l).expect("length checked")))
            .collect::<WireResult<Vec<_>>>()?;
        shares.push(group);
    }
    r.finish()?;
    Ok((params, shares))
}
