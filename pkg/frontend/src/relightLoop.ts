/**
 * Relight scheduler: debounced, latest-wins.
 *
 * Control changes are debounced (100 ms by default, which also caps the
 * request rate at 10/s) and at most one request is in flight; a newer state
 * aborts the in-flight fetch. The image callback only ever fires for the
 * most recently requested state, so the display can never go stale.
 */

import { ApiClient, ApiError, FieldError } from './api'
import { Ranges, UiLightState, clampState, toRelightBody } from './state'

export interface RelightCallbacks {
  onImage(blob: Blob, state: UiLightState): void
  onFieldErrors(errors: FieldError[]): void
  onError(message: string): void
}

export const DEBOUNCE_MS = 100

export class RelightLoop {
  private timer: ReturnType<typeof setTimeout> | null = null
  private latest: UiLightState | null = null
  private inFlight: AbortController | null = null
  private seq = 0

  constructor(
    private readonly api: ApiClient,
    private readonly decId: string,
    private ranges: Ranges,
    private readonly callbacks: RelightCallbacks,
    private readonly delayMs: number = DEBOUNCE_MS,
  ) {}

  setRanges(ranges: Ranges): void {
    this.ranges = ranges
  }

  /** Accept a new control state; the request goes out after the debounce. */
  set(state: UiLightState): void {
    this.latest = clampState(state, this.ranges)
    if (this.timer !== null) clearTimeout(this.timer)
    this.timer = setTimeout(() => {
      this.timer = null
      void this.fire()
    }, this.delayMs)
  }

  /** Skip the debounce for the currently pending state, if any. */
  flush(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer)
      this.timer = null
      void this.fire()
    }
  }

  dispose(): void {
    if (this.timer !== null) clearTimeout(this.timer)
    this.timer = null
    this.inFlight?.abort()
    this.inFlight = null
  }

  private async fire(): Promise<void> {
    if (this.latest === null) return
    const state = this.latest
    const seq = ++this.seq
    this.inFlight?.abort()
    const controller = new AbortController()
    this.inFlight = controller
    try {
      const blob = await this.api.relight(this.decId, toRelightBody(state), controller.signal)
      if (seq === this.seq) this.callbacks.onImage(blob, state)
    } catch (err) {
      if (controller.signal.aborted || seq !== this.seq) return
      if (err instanceof ApiError && err.status === 400) {
        this.callbacks.onFieldErrors(err.fieldErrors)
      } else {
        this.callbacks.onError(err instanceof Error ? err.message : String(err))
      }
    } finally {
      if (this.inFlight === controller) this.inFlight = null
    }
  }
}
