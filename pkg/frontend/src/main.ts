/** DOM wiring for the relight panel. Logic lives in the sibling modules. */

import { ApiClient, FieldError, IMAGE_KINDS, ImageKind } from './api'
import { RelightLoop } from './relightLoop'
import {
  DEFAULT_RANGES,
  Ranges,
  UiLightState,
  clampState,
  rangesFromConfig,
  stateFromManifest,
} from './state'

const api = new ApiClient()

const el = {
  picker: document.getElementById('picker') as HTMLSelectElement,
  banner: document.getElementById('banner') as HTMLDivElement,
  tiles: document.getElementById('tiles') as HTMLDivElement,
  relit: document.getElementById('relit') as HTMLImageElement,
  pad: document.getElementById('pad') as HTMLDivElement,
  padDot: document.getElementById('pad-dot') as HTMLDivElement,
  sliders: {
    sAmb: document.getElementById('s-amb') as HTMLInputElement,
    sDir: document.getElementById('s-dir') as HTMLInputElement,
    alpha: document.getElementById('alpha') as HTMLInputElement,
    aSpec: document.getElementById('a-spec') as HTMLInputElement,
  },
  fieldMessages: document.getElementById('field-messages') as HTMLDivElement,
}

let loop: RelightLoop | null = null
let tilesAbort: AbortController | null = null
let state: UiLightState = { x: 0, y: 0, sAmb: 0.5, sDir: 0.5, alpha: 64, aSpec: 0.2 }
let ranges: Ranges = DEFAULT_RANGES
const objectUrls: string[] = []

function trackUrl(blob: Blob): string {
  const url = URL.createObjectURL(blob)
  objectUrls.push(url)
  return url
}

function releaseUrls(): void {
  for (const url of objectUrls.splice(0)) URL.revokeObjectURL(url)
}

function showBanner(message: string, retry?: () => void): void {
  el.banner.textContent = message
  el.banner.hidden = false
  if (retry) {
    const button = document.createElement('button')
    button.textContent = 'retry'
    button.onclick = retry
    el.banner.appendChild(button)
  }
}

function clearBanner(): void {
  el.banner.hidden = true
  el.banner.textContent = ''
}

function showFieldErrors(errors: FieldError[]): void {
  el.fieldMessages.textContent = ''
  const byControl: Record<string, HTMLInputElement | HTMLDivElement> = {
    x: el.pad,
    y: el.pad,
    s_amb: el.sliders.sAmb,
    s_dir: el.sliders.sDir,
    alpha: el.sliders.alpha,
    a_spec: el.sliders.aSpec,
  }
  for (const control of Object.values(byControl)) control.classList.remove('invalid')
  for (const err of errors) {
    byControl[err.field]?.classList.add('invalid')
    const line = document.createElement('div')
    line.textContent = `${err.field}: ${err.message}`
    el.fieldMessages.appendChild(line)
  }
}

function syncControls(): void {
  el.sliders.sAmb.value = String(state.sAmb)
  el.sliders.sDir.value = String(state.sDir)
  el.sliders.alpha.value = String(state.alpha)
  el.sliders.aSpec.value = String(state.aSpec)
  el.padDot.style.left = `${((1 - state.x) / 2) * 100}%`
  el.padDot.style.top = `${((1 - state.y) / 2) * 100}%`
}

function pushState(update: Partial<UiLightState>): void {
  state = clampState({ ...state, ...update }, ranges)
  syncControls()
  showFieldErrors([])
  loop?.set(state)
}

async function loadTiles(id: string, signal: AbortSignal): Promise<void> {
  el.tiles.textContent = ''
  const slots = new Map<ImageKind, HTMLImageElement>()
  for (const kind of IMAGE_KINDS) {
    const figure = document.createElement('figure')
    const img = document.createElement('img')
    const caption = document.createElement('figcaption')
    caption.textContent = kind
    figure.append(img, caption)
    el.tiles.appendChild(figure)
    slots.set(kind, img)
  }
  await Promise.all(
    IMAGE_KINDS.map(async (kind) => {
      const blob = await api.getImage(id, kind, signal)
      if (!signal.aborted) slots.get(kind)!.src = trackUrl(blob)
    }),
  )
}

async function selectDecomposition(id: string): Promise<void> {
  tilesAbort?.abort()
  loop?.dispose()
  releaseUrls()
  clearBanner()
  const abort = new AbortController()
  tilesAbort = abort
  try {
    const [manifest, config] = await Promise.all([
      api.getManifest(id, abort.signal),
      api.getConfig(id, abort.signal),
    ])
    ranges = rangesFromConfig(config)
    el.sliders.alpha.min = String(ranges.alpha[0])
    el.sliders.alpha.max = String(ranges.alpha[1])
    el.sliders.aSpec.min = String(ranges.aSpec[0])
    el.sliders.aSpec.max = String(ranges.aSpec[1])
    state = clampState(stateFromManifest(manifest), ranges)
    syncControls()
    loop = new RelightLoop(api, id, ranges, {
      onImage: (blob) => {
        el.relit.src = trackUrl(blob)
        showFieldErrors([])
      },
      onFieldErrors: showFieldErrors,
      onError: (message) => showBanner(message, () => loop?.set(state)),
    })
    await loadTiles(id, abort.signal)
    // Identity relight: controls at manifest values reproduce the recon tile.
    loop.set(state)
    loop.flush()
  } catch (err) {
    if (!abort.signal.aborted) {
      showBanner(err instanceof Error ? err.message : String(err), () => void selectDecomposition(id))
    }
  }
}

function wireControls(): void {
  const sliderFields: [HTMLInputElement, keyof UiLightState][] = [
    [el.sliders.sAmb, 'sAmb'],
    [el.sliders.sDir, 'sDir'],
    [el.sliders.alpha, 'alpha'],
    [el.sliders.aSpec, 'aSpec'],
  ]
  for (const [input, field] of sliderFields) {
    input.addEventListener('input', () => pushState({ [field]: Number(input.value) }))
  }
  const padMove = (ev: PointerEvent) => {
    const rect = el.pad.getBoundingClientRect()
    // Screen-left maps to x = +1: the light model's x axis points left.
    const x = 1 - (2 * (ev.clientX - rect.left)) / rect.width
    const y = 1 - (2 * (ev.clientY - rect.top)) / rect.height
    pushState({ x, y })
  }
  el.pad.addEventListener('pointerdown', (ev) => {
    el.pad.setPointerCapture(ev.pointerId)
    padMove(ev)
  })
  el.pad.addEventListener('pointermove', (ev) => {
    if (ev.buttons) padMove(ev)
  })
}

async function boot(): Promise<void> {
  wireControls()
  try {
    const ids = await api.listDecompositions()
    el.picker.textContent = ''
    for (const id of ids) {
      const option = document.createElement('option')
      option.value = id
      option.textContent = id
      el.picker.appendChild(option)
    }
    el.picker.addEventListener('change', () => void selectDecomposition(el.picker.value))
    if (ids.length > 0) await selectDecomposition(ids[0])
    else showBanner('no decompositions on the server', () => void boot())
  } catch (err) {
    showBanner(err instanceof Error ? err.message : String(err), () => void boot())
  }
}

void boot()
