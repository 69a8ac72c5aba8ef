use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Extent, ReferenceFile, RowGroupLayout, SyntheticTable};
use crate::error::Result;
use crate::formats::{
    AvroConstants, FormatDescriptor, FormatName, ParquetConstants, SeqFileConstants,
    VerticalConstants,
};

/// What a run of emitted bytes represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ByteTag {
    Header,
    Footer,
    Data,
    RowMeta,
    Separator,
    Sync,
    BlockMeta,
    PageLevels,
    RowGroupMeta,
}

impl ByteTag {
    fn fill(self) -> u8 {
        match self {
            ByteTag::Header => b'H',
            ByteTag::Footer => b'F',
            ByteTag::Data => 0,
            ByteTag::RowMeta => b'r',
            ByteTag::Separator => b'|',
            ByteTag::Sync => 0xff,
            ByteTag::BlockMeta => b'b',
            ByteTag::PageLevels => b'l',
            ByteTag::RowGroupMeta => b'g',
        }
    }
}

pub trait ByteSink {
    fn emit(&mut self, file: u32, tag: ByteTag, len: u64) -> io::Result<()>;
}

/// Keeps only the length of every file.
#[derive(Debug, Clone, Default)]
pub struct CountingSink {
    pub lengths: Vec<u64>,
}

impl CountingSink {
    pub fn total(&self) -> u64 {
        self.lengths.iter().sum()
    }
}

impl ByteSink for CountingSink {
    #[inline]
    fn emit(&mut self, file: u32, _tag: ByteTag, len: u64) -> io::Result<()> {
        let i = file as usize;
        if i >= self.lengths.len() {
            self.lengths.resize(i + 1, 0);
        }
        self.lengths[i] += len;
        Ok(())
    }
}

/// Writes `<stem>.<file>.bin` files under a directory.
pub struct DirSink {
    dir: PathBuf,
    stem: String,
    files: Vec<Option<BufWriter<File>>>,
}

impl DirSink {
    pub fn new(dir: &Path, stem: &str) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            stem: stem.to_string(),
            files: Vec::new(),
        })
    }

    pub fn path_of(&self, file: u32) -> PathBuf {
        self.dir.join(format!("{}.{file}.bin", self.stem))
    }
}

impl ByteSink for DirSink {
    fn emit(&mut self, file: u32, tag: ByteTag, len: u64) -> io::Result<()> {
        let i = file as usize;
        if i >= self.files.len() {
            self.files.resize_with(i + 1, || None);
        }
        if self.files[i].is_none() {
            self.files[i] = Some(BufWriter::new(File::create(self.path_of(file))?));
        }
        let out = self.files[i].as_mut().expect("opened above");
        let block = [tag.fill(); 4096];
        let mut left = len;
        while left > 0 {
            let n = left.min(block.len() as u64) as usize;
            out.write_all(&block[..n])?;
            left -= n as u64;
        }
        Ok(())
    }
}

impl Drop for DirSink {
    fn drop(&mut self) {
        for f in self.files.iter_mut().flatten() {
            let _ = f.flush();
        }
    }
}

const LENGTH_PREFIX: u64 = 4;

/// Bytes of the zig-zag varint Avro uses for string lengths.
fn avro_length_prefix(len: u32) -> u64 {
    let mut z = u64::from(len) << 1;
    let mut n = 1;
    while z >= 0x80 {
        z >>= 7;
        n += 1;
    }
    n
}

fn bytes(v: f64) -> u64 {
    v.round() as u64
}

fn empty_file(format: FormatName, table: &SyntheticTable) -> ReferenceFile {
    ReferenceFile {
        format,
        header: 0,
        body: 0,
        footer: 0,
        rows: 0,
        cols: table.cols() as u32,
        file_lengths: Vec::new(),
        per_task_meta: Vec::new(),
        header_footer: Vec::new(),
        sync_markers: 0,
        blocks: 0,
        pages: 0,
        row_groups: Vec::new(),
        column_files: Vec::new(),
    }
}

pub(super) enum Writer<S> {
    Seq(SeqWriter<S>),
    Avro(AvroWriter<S>),
    Parquet(ParquetWriter<S>),
    Vertical(VerticalWriter<S>),
}

impl<S: ByteSink> Writer<S> {
    pub(super) fn new(fd: &FormatDescriptor, table: &SyntheticTable, sink: S) -> Result<Self> {
        let varlen = table.columns.iter().map(|c| c.varlen).collect();
        Ok(match fd {
            FormatDescriptor::SeqFile(c) => Writer::Seq(SeqWriter::new(c, table, varlen, sink)?),
            FormatDescriptor::Avro(c) => Writer::Avro(AvroWriter::new(c, table, varlen, sink)?),
            FormatDescriptor::Parquet(c) => {
                Writer::Parquet(ParquetWriter::new(c, table, varlen, sink)?)
            }
            FormatDescriptor::Vertical(c) => {
                Writer::Vertical(VerticalWriter::new(c, table, varlen, sink)?)
            }
        })
    }

    pub(super) fn push_row(&mut self, widths: &[u32]) -> Result<()> {
        match self {
            Writer::Seq(w) => w.push_row(widths),
            Writer::Avro(w) => w.push_row(widths),
            Writer::Parquet(w) => w.push_row(widths),
            Writer::Vertical(w) => w.push_row(widths),
        }
    }

    pub(super) fn finish(self) -> Result<(ReferenceFile, S)> {
        match self {
            Writer::Seq(w) => w.finish(),
            Writer::Avro(w) => w.finish(),
            Writer::Parquet(w) => w.finish(),
            Writer::Vertical(w) => w.finish(),
        }
    }
}

pub(super) struct SeqWriter<S> {
    sink: S,
    out: ReferenceFile,
    varlen: Vec<bool>,
    row_meta: u64,
    separators: u64,
    sync_marker: u64,
    sync_block: u64,
    footer: u64,
    pos: u64,
    since_sync: u64,
}

impl<S: ByteSink> SeqWriter<S> {
    fn new(
        c: &SeqFileConstants,
        table: &SyntheticTable,
        varlen: Vec<bool>,
        mut sink: S,
    ) -> Result<Self> {
        let header = bytes(c.header);
        sink.emit(0, ByteTag::Header, header)?;
        let mut out = empty_file(FormatName::SeqFile, table);
        out.header = header;
        Ok(Self {
            sink,
            out,
            varlen,
            row_meta: bytes(c.record_length) + bytes(c.key_length),
            separators: bytes(c.col_separator) * (table.cols() as u64).saturating_sub(2),
            sync_marker: bytes(c.sync_marker),
            sync_block: bytes(c.sync_block),
            footer: bytes(c.footer),
            pos: header,
            since_sync: 0,
        })
    }

    fn sync(&mut self) -> Result<()> {
        self.sink.emit(0, ByteTag::Sync, self.sync_marker)?;
        self.pos += self.sync_marker;
        self.out.sync_markers += 1;
        self.since_sync = 0;
        Ok(())
    }

    fn push_row(&mut self, widths: &[u32]) -> Result<()> {
        let payload: u64 = widths
            .iter()
            .zip(&self.varlen)
            .map(|(&w, &v)| u64::from(w) + if v { LENGTH_PREFIX } else { 0 })
            .sum();
        self.sink.emit(0, ByteTag::RowMeta, self.row_meta)?;
        self.sink.emit(0, ByteTag::Data, payload)?;
        self.sink.emit(0, ByteTag::Separator, self.separators)?;
        let row = self.row_meta + payload + self.separators;
        self.pos += row;
        self.out.rows += 1;
        self.since_sync += row;
        if self.since_sync >= self.sync_block {
            self.sync()?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<(ReferenceFile, S)> {
        if self.since_sync > 0 {
            self.sync()?;
        }
        self.sink.emit(0, ByteTag::Footer, self.footer)?;
        let mut out = self.out;
        out.body = self.pos - out.header;
        out.footer = self.footer;
        out.file_lengths = vec![out.total()];
        out.per_task_meta = vec![Extent::new(0, 0, out.header)];
        out.header_footer = vec![
            Extent::new(0, 0, out.header),
            Extent::new(0, self.pos, out.footer),
        ];
        Ok((out, self.sink))
    }
}

pub(super) struct AvroWriter<S> {
    sink: S,
    out: ReferenceFile,
    varlen: Vec<bool>,
    row_meta: u64,
    block_trailer: u64,
    block: u64,
    footer: u64,
    pos: u64,
    in_block: u64,
}

impl<S: ByteSink> AvroWriter<S> {
    fn new(
        c: &AvroConstants,
        table: &SyntheticTable,
        varlen: Vec<bool>,
        mut sink: S,
    ) -> Result<Self> {
        let header = bytes(c.version)
            + bytes(c.col_schema) * table.cols() as u64
            + bytes(c.codec)
            + bytes(c.sync_marker);
        sink.emit(0, ByteTag::Header, header)?;
        let mut out = empty_file(FormatName::Avro, table);
        out.header = header;
        Ok(Self {
            sink,
            out,
            varlen,
            row_meta: bytes(c.row_meta),
            block_trailer: bytes(c.block_meta) + bytes(c.sync_marker),
            block: bytes(c.block),
            footer: bytes(c.footer),
            pos: header,
            in_block: 0,
        })
    }

    fn close_block(&mut self) -> Result<()> {
        self.sink.emit(0, ByteTag::BlockMeta, self.block_trailer)?;
        self.pos += self.block_trailer;
        self.out.blocks += 1;
        self.in_block = 0;
        Ok(())
    }

    fn push_row(&mut self, widths: &[u32]) -> Result<()> {
        let payload: u64 = widths
            .iter()
            .zip(&self.varlen)
            .map(|(&w, &v)| u64::from(w) + if v { avro_length_prefix(w) } else { 0 })
            .sum();
        self.sink.emit(0, ByteTag::RowMeta, self.row_meta)?;
        self.sink.emit(0, ByteTag::Data, payload)?;
        let row = self.row_meta + payload;
        self.pos += row;
        self.out.rows += 1;
        self.in_block += row;
        if self.in_block >= self.block {
            self.close_block()?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<(ReferenceFile, S)> {
        if self.in_block > 0 {
            self.close_block()?;
        }
        self.sink.emit(0, ByteTag::Footer, self.footer)?;
        let mut out = self.out;
        out.body = self.pos - out.header;
        out.footer = self.footer;
        out.file_lengths = vec![out.total()];
        out.per_task_meta = vec![Extent::new(0, 0, out.header)];
        out.header_footer = vec![
            Extent::new(0, 0, out.header),
            Extent::new(0, self.pos, out.footer),
        ];
        Ok((out, self.sink))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ColumnChunk {
    data: u64,
    page_fill: u64,
    pages: u64,
}

pub(super) struct ParquetWriter<S> {
    sink: S,
    out: ReferenceFile,
    varlen: Vec<bool>,
    c: ParquetConstants,
    levels: u64,
    marker: u64,
    trailer: u64,
    page: u64,
    row_group: u64,
    chunks: Vec<ColumnChunk>,
    group_data: u64,
    group_first_row: u64,
    pos: u64,
}

impl<S: ByteSink> ParquetWriter<S> {
    fn new(
        c: &ParquetConstants,
        table: &SyntheticTable,
        varlen: Vec<bool>,
        mut sink: S,
    ) -> Result<Self> {
        let header = bytes(c.header);
        sink.emit(0, ByteTag::Header, header)?;
        let mut out = empty_file(FormatName::Parquet, table);
        out.header = header;
        Ok(Self {
            sink,
            out,
            varlen,
            c: *c,
            levels: bytes(c.definition_level) + bytes(c.repetition_level),
            marker: bytes(c.sync_marker),
            trailer: bytes(c.row_counter) + bytes(c.sync_marker),
            page: bytes(c.page),
            row_group: bytes(c.row_group),
            chunks: vec![ColumnChunk::default(); table.cols()],
            group_data: 0,
            group_first_row: 0,
            pos: header,
        })
    }

    fn push_row(&mut self, widths: &[u32]) -> Result<()> {
        for ((chunk, &w), &v) in self.chunks.iter_mut().zip(widths).zip(&self.varlen) {
            let value = u64::from(w) + if v { LENGTH_PREFIX } else { 0 };
            chunk.data += value;
            chunk.page_fill += value;
            if chunk.page_fill >= self.page {
                chunk.pages += 1;
                chunk.page_fill = 0;
            }
            self.group_data += value;
        }
        self.out.rows += 1;
        if self.group_data + self.marker * self.chunks.len() as u64 >= self.row_group {
            self.close_group()?;
        }
        Ok(())
    }

    fn close_group(&mut self) -> Result<()> {
        let start = self.pos;
        let mut columns = Vec::with_capacity(self.chunks.len());
        let mut pages = 0;
        for i in 0..self.chunks.len() {
            let mut chunk = std::mem::take(&mut self.chunks[i]);
            if chunk.page_fill > 0 {
                chunk.pages += 1;
            }
            let levels = self.levels * chunk.pages;
            self.sink.emit(0, ByteTag::PageLevels, levels)?;
            self.sink.emit(0, ByteTag::Data, chunk.data)?;
            self.sink.emit(0, ByteTag::Sync, self.marker)?;
            let len = levels + chunk.data + self.marker;
            columns.push(Extent::new(0, self.pos, len));
            self.pos += len;
            pages += chunk.pages;
        }
        self.sink.emit(0, ByteTag::RowGroupMeta, self.trailer)?;
        let trailer = Extent::new(0, self.pos, self.trailer);
        self.pos += self.trailer;
        self.out.pages += pages;
        self.out.row_groups.push(RowGroupLayout {
            first_row: self.group_first_row,
            rows: self.out.rows - self.group_first_row,
            extent: Extent::new(0, start, self.pos - start),
            columns,
            trailer,
            pages,
        });
        self.group_first_row = self.out.rows;
        self.group_data = 0;
        Ok(())
    }

    fn finish(mut self) -> Result<(ReferenceFile, S)> {
        if self.out.rows > self.group_first_row {
            self.close_group()?;
        }
        let c = &self.c;
        let footer = bytes(c.version)
            + bytes(c.col_schema) * self.chunks.len() as u64
            + bytes(c.magic)
            + bytes(c.footer_length)
            + bytes(c.col_stats_meta) * (self.out.row_groups.len() as u64 + self.out.pages);
        self.sink.emit(0, ByteTag::Footer, footer)?;
        let mut out = self.out;
        out.body = self.pos - out.header;
        out.footer = footer;
        out.file_lengths = vec![out.total()];
        out.header_footer = vec![
            Extent::new(0, 0, out.header),
            Extent::new(0, self.pos, footer),
        ];
        out.per_task_meta = out.header_footer.clone();
        Ok((out, self.sink))
    }
}

/// File 0 holds header and footer; column `i` lives in file `i + 1`.
pub(super) struct VerticalWriter<S> {
    sink: S,
    out: ReferenceFile,
    varlen: Vec<bool>,
    marker: u64,
    footer: u64,
    lengths: Vec<u64>,
}

impl<S: ByteSink> VerticalWriter<S> {
    fn new(
        c: &VerticalConstants,
        table: &SyntheticTable,
        varlen: Vec<bool>,
        mut sink: S,
    ) -> Result<Self> {
        let header = bytes(c.header);
        sink.emit(0, ByteTag::Header, header)?;
        let mut out = empty_file(FormatName::Vertical, table);
        out.header = header;
        Ok(Self {
            sink,
            out,
            varlen,
            marker: bytes(c.col_separator),
            footer: bytes(c.footer),
            lengths: vec![0; table.cols()],
        })
    }

    fn push_row(&mut self, widths: &[u32]) -> Result<()> {
        for (i, (&w, &v)) in widths.iter().zip(&self.varlen).enumerate() {
            let value = u64::from(w) + if v { LENGTH_PREFIX } else { 0 };
            self.sink.emit(i as u32 + 1, ByteTag::Data, value)?;
            self.lengths[i] += value;
        }
        self.out.rows += 1;
        Ok(())
    }

    fn finish(mut self) -> Result<(ReferenceFile, S)> {
        for (i, len) in self.lengths.iter_mut().enumerate() {
            self.sink.emit(i as u32 + 1, ByteTag::Separator, self.marker)?;
            *len += self.marker;
        }
        self.sink.emit(0, ByteTag::Footer, self.footer)?;
        let mut out = self.out;
        out.body = self.lengths.iter().sum();
        out.footer = self.footer;
        out.file_lengths = std::iter::once(out.header + out.footer)
            .chain(self.lengths.iter().copied())
            .collect();
        out.header_footer = vec![
            Extent::new(0, 0, out.header),
            Extent::new(0, out.header, out.footer),
        ];
        out.per_task_meta = out.header_footer.clone();
        out.column_files = self
            .lengths
            .iter()
            .enumerate()
            .map(|(i, &len)| Extent::new(i as u32 + 1, 0, len))
            .collect();
        Ok((out, self.sink))
    }
}
