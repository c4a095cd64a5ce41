/**
 * Light/material control state and its mapping to the relight request body.
 *
 * Every control clamps to its bound client-side; the server enforces the
 * same ranges, so a clamped state never triggers a 400.
 */

export interface Ranges {
  alpha: [number, number]
  aSpec: [number, number]
}

export interface UiLightState {
  x: number
  y: number
  sAmb: number
  sDir: number
  alpha: number
  aSpec: number
}

export interface RelightBody {
  x: number
  y: number
  s_amb: number
  s_dir: number
  alpha: number
  a_spec: number
}

export const DEFAULT_RANGES: Ranges = { alpha: [1, 4096], aSpec: [0, 0.5] }

function clampTo(value: number, lo: number, hi: number): number {
  if (!Number.isFinite(value)) return lo
  return Math.min(hi, Math.max(lo, value))
}

export function clampState(s: UiLightState, ranges: Ranges): UiLightState {
  return {
    x: clampTo(s.x, -1, 1),
    y: clampTo(s.y, -1, 1),
    sAmb: clampTo(s.sAmb, 0, 1),
    sDir: clampTo(s.sDir, 0, 1),
    alpha: clampTo(s.alpha, ranges.alpha[0], ranges.alpha[1]),
    aSpec: clampTo(s.aSpec, ranges.aSpec[0], ranges.aSpec[1]),
  }
}

/** Serialize to the POST body; field names match the HTTP API exactly. */
export function toRelightBody(s: UiLightState): RelightBody {
  return { x: s.x, y: s.y, s_amb: s.sAmb, s_dir: s.sDir, alpha: s.alpha, a_spec: s.aSpec }
}

/**
 * The identity state for a manifest: the stored light and material, so that
 * a relight with this state reproduces the reconstruction byte for byte.
 *
 * The manifest stores the unit direction l = (x, y, 1)/norm; dividing the
 * first two components by the third recovers the (x, y) the pad uses.
 */
export function stateFromManifest(manifest: {
  light_material: { s_amb: number; s_dir: number; l: number[]; alpha: number; a_spec: number }
}): UiLightState {
  const lm = manifest.light_material
  return {
    x: lm.l[0] / lm.l[2],
    y: lm.l[1] / lm.l[2],
    sAmb: lm.s_amb,
    sDir: lm.s_dir,
    alpha: lm.alpha,
    aSpec: lm.a_spec,
  }
}

export function rangesFromConfig(config: { alpha_range: number[]; a_spec_range: number[] }): Ranges {
  return {
    alpha: [config.alpha_range[0], config.alpha_range[1]],
    aSpec: [config.a_spec_range[0], config.a_spec_range[1]],
  }
}

export function statesEqual(a: UiLightState, b: UiLightState): boolean {
  return (
    a.x === b.x && a.y === b.y && a.sAmb === b.sAmb &&
    a.sDir === b.sDir && a.alpha === b.alpha && a.aSpec === b.aSpec
  )
}
