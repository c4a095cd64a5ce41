/** Delay execution until `delayMs` after the last call. */
export function debounce<T extends (...args: never[]) => void>(
  fn: T,
  delayMs: number,
): ((...args: Parameters<T>) => void) & { cancel(): void; flush(): void } {
  let timer: ReturnType<typeof setTimeout> | null = null
  let pending: Parameters<T> | null = null

  const debounced = (...args: Parameters<T>) => {
    pending = args
    if (timer !== null) clearTimeout(timer)
    timer = setTimeout(() => {
      timer = null
      const args2 = pending as Parameters<T>
      pending = null
      fn(...args2)
    }, delayMs)
  }

  debounced.cancel = () => {
    if (timer !== null) {
      clearTimeout(timer)
      timer = null
      pending = null
    }
  }

  debounced.flush = () => {
    if (timer !== null) {
      clearTimeout(timer)
      timer = null
      const args = pending as Parameters<T>
      pending = null
      fn(...args)
    }
  }

  return debounced
}
