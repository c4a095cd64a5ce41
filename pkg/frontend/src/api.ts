/** Thin typed wrapper over the relight service HTTP API. */

import type { RelightBody } from './state'

export interface FieldError {
  field: string
  message: string
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly fieldErrors: FieldError[] = [],
  ) {
    super(message)
    this.name = 'ApiError'
  }
}

export interface Manifest {
  id: string
  kind: string
  light_material: { s_amb: number; s_dir: number; l: number[]; alpha: number; a_spec: number }
}

export interface ServerConfig {
  alpha_range: number[]
  a_spec_range: number[]
}

export type ImageKind = 'albedo' | 'normals' | 'diffuse' | 'specular' | 'recon'
export const IMAGE_KINDS: ImageKind[] = ['albedo', 'normals', 'diffuse', 'specular', 'recon']

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return
  let fieldErrors: FieldError[] = []
  let message = `request failed with status ${res.status}`
  try {
    const body = await res.json()
    if (Array.isArray(body.errors)) fieldErrors = body.errors
    if (typeof body.error === 'string') message = body.error
  } catch {
    // not JSON; keep the generic message
  }
  throw new ApiError(message, res.status, fieldErrors)
}

export class ApiClient {
  constructor(readonly baseUrl: string = '') {}

  async listDecompositions(signal?: AbortSignal): Promise<string[]> {
    const res = await fetch(`${this.baseUrl}/api/decompositions`, { signal })
    await raiseForStatus(res)
    return res.json()
  }

  async getManifest(id: string, signal?: AbortSignal): Promise<Manifest> {
    const res = await fetch(`${this.baseUrl}/api/decompositions/${encodeURIComponent(id)}`, { signal })
    await raiseForStatus(res)
    return res.json()
  }

  async getConfig(id: string, signal?: AbortSignal): Promise<ServerConfig> {
    const res = await fetch(`${this.baseUrl}/api/config/${encodeURIComponent(id)}`, { signal })
    await raiseForStatus(res)
    return res.json()
  }

  async getImage(id: string, kind: ImageKind, signal?: AbortSignal): Promise<Blob> {
    const res = await fetch(
      `${this.baseUrl}/api/decompositions/${encodeURIComponent(id)}/image/${kind}`,
      { signal },
    )
    await raiseForStatus(res)
    return res.blob()
  }

  async relight(id: string, body: RelightBody, signal?: AbortSignal): Promise<Blob> {
    const res = await fetch(`${this.baseUrl}/api/decompositions/${encodeURIComponent(id)}/relight`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
      signal,
    })
    await raiseForStatus(res)
    return res.blob()
  }
}
