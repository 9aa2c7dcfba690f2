//! Monte Carlo time-tag simulation and the tag-stream data model.
//!
//! A [`TagStream`] is the exchange format between simulation and analysis:
//! time-ascending `(t, channel)` records in integer picoseconds. Every
//! operation here takes a sorted stream and returns a sorted stream.

mod io;
mod sim;
mod stream;

pub use io::{read_binary, read_csv, read_tag_file, write_binary, write_csv, write_tag_file, TagFormat, MAGIC, VERSION};
pub use sim::{simulate, ChannelLayout, RunConfig, RunExtent};
pub use stream::{add_dark_counts, apply_dead_time, apply_dead_time_per_channel, window_filter, TagStream, TimeTag, WindowFiltered};
