use std::fmt;
use std::marker::PhantomData;
use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use super::{Block, HugeAlloc, DEFAULT_ALIGN};

/// Growable buffer of plain-old-data elements living in [`HugeAlloc`] memory.
pub struct HugeVec<T: Copy> {
    alloc: Arc<HugeAlloc>,
    block: Option<Block>,
    len: usize,
    cap: usize,
    _marker: PhantomData<T>,
}

impl<T: Copy> HugeVec<T> {
    pub fn new(alloc: Arc<HugeAlloc>) -> Self {
        assert!(std::mem::align_of::<T>() <= DEFAULT_ALIGN);
        assert!(std::mem::size_of::<T>() > 0);
        HugeVec {
            alloc,
            block: None,
            len: 0,
            cap: 0,
            _marker: PhantomData,
        }
    }

    pub fn with_capacity(alloc: Arc<HugeAlloc>, cap: usize) -> Self {
        let mut v = Self::new(alloc);
        v.reserve(cap);
        v
    }

    pub fn allocator(&self) -> &Arc<HugeAlloc> {
        &self.alloc
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    pub fn reserve(&mut self, additional: usize) {
        let needed = self.len.checked_add(additional).expect("capacity overflow");
        if needed <= self.cap {
            return;
        }
        let new_cap = needed.max(self.cap * 2).max(4);
        let bytes = new_cap
            .checked_mul(std::mem::size_of::<T>())
            .expect("capacity overflow");
        let block = self
            .alloc
            .alloc(bytes)
            .unwrap_or_else(|e| panic!("HugeVec allocation of {bytes} bytes failed: {e}"));
        if let Some(old) = self.block.take() {
            // SAFETY: both blocks are valid for `len` elements and disjoint.
            unsafe {
                std::ptr::copy_nonoverlapping(old.as_ptr() as *const T, block.as_ptr() as *mut T, self.len)
            };
            self.alloc.free(old).expect("block owned by this allocator");
        }
        self.block = Some(block);
        self.cap = new_cap;
    }

    #[inline]
    pub fn push(&mut self, value: T) {
        if self.len == self.cap {
            self.reserve(1);
        }
        // SAFETY: len < cap after reserve.
        unsafe { self.ptr().add(self.len).write(value) };
        self.len += 1;
    }

    pub fn extend_from_slice(&mut self, values: &[T]) {
        self.reserve(values.len());
        // SAFETY: capacity reserved above; source cannot alias our block
        // because we hold `&mut self`.
        unsafe {
            std::ptr::copy_nonoverlapping(values.as_ptr(), self.ptr().add(self.len), values.len())
        };
        self.len += values.len();
    }

    pub fn pop(&mut self) -> Option<T> {
        if self.len == 0 {
            None
        } else {
            self.len -= 1;
            // SAFETY: index was initialized before the decrement.
            Some(unsafe { self.ptr().add(self.len).read() })
        }
    }

    #[inline]
    pub fn truncate(&mut self, len: usize) {
        self.len = self.len.min(len);
    }

    pub fn clear(&mut self) {
        self.len = 0;
    }

    /// Returns the allocation to the pool and resets capacity.
    pub fn release(&mut self) {
        if let Some(b) = self.block.take() {
            self.alloc.free(b).expect("block owned by this allocator");
        }
        self.len = 0;
        self.cap = 0;
    }

    #[inline]
    fn ptr(&self) -> *mut T {
        match &self.block {
            Some(b) => b.as_ptr() as *mut T,
            None => std::ptr::NonNull::dangling().as_ptr(),
        }
    }
}

impl<T: Copy> Deref for HugeVec<T> {
    type Target = [T];

    #[inline]
    fn deref(&self) -> &[T] {
        // SAFETY: the first `len` elements are initialized.
        unsafe { std::slice::from_raw_parts(self.ptr(), self.len) }
    }
}

impl<T: Copy> DerefMut for HugeVec<T> {
    #[inline]
    fn deref_mut(&mut self) -> &mut [T] {
        // SAFETY: as above, with unique access.
        unsafe { std::slice::from_raw_parts_mut(self.ptr(), self.len) }
    }
}

impl<T: Copy> Drop for HugeVec<T> {
    fn drop(&mut self) {
        self.release();
    }
}

impl<T: Copy> Clone for HugeVec<T> {
    fn clone(&self) -> Self {
        let mut v = HugeVec::with_capacity(self.alloc.clone(), self.len);
        v.extend_from_slice(self);
        v
    }
}

impl<T: Copy + fmt::Debug> fmt::Debug for HugeVec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

// SAFETY: HugeVec owns its elements like Vec does.
unsafe impl<T: Copy + Send> Send for HugeVec<T> {}
unsafe impl<T: Copy + Sync> Sync for HugeVec<T> {}
