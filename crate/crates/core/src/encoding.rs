//! Canonical binary encoding.
//!
//! Every multi-field structure is written as a sequence of fields in
//! declaration order. Each field is a 4-byte big-endian length followed by
//! that many bytes. Integers are fixed-width big-endian inside their field,
//! digests are the raw 32 bytes, nested structures are their own encoding,
//! and lists are a field whose contents are the length-prefixed items.
//!
//! This encoding is the preimage for every hash in the crate, so it must stay
//! stable.

use thiserror::Error;

/// Upper bound on any single field.
pub const MAX_FIELD_LEN: usize = 1 << 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unexpected end of input: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("field length {0} exceeds limit")]
    FieldTooLarge(usize),
    #[error("field has length {actual}, expected {expected}")]
    BadLength { expected: usize, actual: usize },
    #[error("{0} trailing bytes after structure")]
    TrailingBytes(usize),
    #[error("invalid value for {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

impl DecodeError {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        DecodeError::Invalid {
            field,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, data: &[u8]) -> &mut Self {
        let len = u32::try_from(data.len()).expect("field longer than u32::MAX");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(data);
        self
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.bytes(&[v])
    }

    pub fn bool(&mut self, v: bool) -> &mut Self {
        self.u8(u8::from(v))
    }

    pub fn u16(&mut self, v: u16) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn nested<T: Canonical>(&mut self, value: &T) -> &mut Self {
        let inner = value.to_canonical_bytes();
        self.bytes(&inner)
    }

    pub fn list<T: Canonical>(&mut self, items: &[T]) -> &mut Self {
        let mut inner = Encoder::new();
        for item in items {
            inner.nested(item);
        }
        self.bytes(&inner.buf)
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    input: &'a [u8],
}

impl<'a> Decoder<'a> {
    pub fn new(input: &'a [u8]) -> Self {
        Self { input }
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.input.len() < n {
            return Err(DecodeError::Truncated {
                needed: n,
                available: self.input.len(),
            });
        }
        let (head, tail) = self.input.split_at(n);
        self.input = tail;
        Ok(head)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let len_bytes = self.take(4)?;
        let len = u32::from_be_bytes(len_bytes.try_into().expect("4 bytes")) as usize;
        if len > MAX_FIELD_LEN {
            return Err(DecodeError::FieldTooLarge(len));
        }
        self.take(len)
    }

    pub fn fixed<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let field = self.bytes()?;
        field.try_into().map_err(|_| DecodeError::BadLength {
            expected: N,
            actual: field.len(),
        })
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.fixed::<1>()?[0])
    }

    pub fn bool(&mut self) -> Result<bool, DecodeError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(DecodeError::invalid("bool", format!("byte {other}"))),
        }
    }

    pub fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_be_bytes(self.fixed()?))
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.fixed()?))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.fixed()?))
    }

    pub fn nested<T: Canonical>(&mut self) -> Result<T, DecodeError> {
        let field = self.bytes()?;
        T::from_canonical_bytes(field)
    }

    pub fn list<T: Canonical>(&mut self, max_items: usize) -> Result<Vec<T>, DecodeError> {
        let field = self.bytes()?;
        let mut inner = Decoder::new(field);
        let mut out = Vec::new();
        while !inner.is_empty() {
            if out.len() == max_items {
                return Err(DecodeError::invalid(
                    "list",
                    format!("more than {max_items} items"),
                ));
            }
            out.push(inner.nested()?);
        }
        Ok(out)
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        if self.input.is_empty() {
            Ok(())
        } else {
            Err(DecodeError::TrailingBytes(self.input.len()))
        }
    }
}

/// A structure with a canonical field-sequence encoding.
pub trait Canonical: Sized {
    fn encode_fields(&self, enc: &mut Encoder);

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError>;

    fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode_fields(&mut enc);
        enc.finish()
    }

    fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes);
        let value = Self::decode_fields(&mut dec)?;
        dec.finish()?;
        Ok(value)
    }
}

impl Canonical for u64 {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.u64(*self);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        dec.u64()
    }
}
