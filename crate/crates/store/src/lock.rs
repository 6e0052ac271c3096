use std::fs::{File, OpenOptions};
use std::io;
use std::os::unix::io::AsRawFd;
use std::path::Path;

use crate::error::{Result, StoreError};

/// Exclusive advisory lock, released when dropped.
#[derive(Debug)]
pub(crate) struct WriterLock(#[allow(dead_code)] File);

impl WriterLock {
    pub fn acquire(path: &Path, table: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).truncate(false).write(true).open(path)?;
        // SAFETY: flock on a descriptor we own for the lifetime of `file`.
        let rc = unsafe { libc::flock(file.as_raw_fd(), libc::LOCK_EX | libc::LOCK_NB) };
        if rc != 0 {
            let err = io::Error::last_os_error();
            return Err(match err.kind() {
                io::ErrorKind::WouldBlock => StoreError::Locked(table.to_path_buf()),
                _ => StoreError::Io(err),
            });
        }
        Ok(WriterLock(file))
    }
}
