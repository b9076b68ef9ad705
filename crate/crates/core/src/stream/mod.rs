//! RGB-D frame transport: privacy blur, binary codec, length-prefixed wire
//! framing, paced sending and latency accounting.

pub mod codec;
pub mod defocus;
pub mod frame;
pub mod latency;
pub mod pacing;
pub mod transport;
pub mod wire;

pub use codec::{decode_frame, encode_frame, Codec, DecodeError, DepthScale, EncodeOptions, FrameHeader};
pub use defocus::defocus;
pub use frame::RgbdFrame;
pub use latency::{latency_report, LatencyRecord, LatencyReport};
pub use pacing::{send_frames, Clock, DropOldestQueue, FakeClock, SystemClock};
pub use transport::{connect_with_retry, pipe, Endpoint, PipeReader, PipeWriter};
pub use wire::{receive_frames, write_record, FrameReader};
