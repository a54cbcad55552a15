// Typed client for the MOS study HTTP JSON API. The server never sends
// version labels or image ids; items carry only opaque stimulus URLs.

export interface Progress {
  answered: number
  total: number
}

export interface ItemView {
  item_id: string
  kind: 'calibration' | 'rating'
  image_url: string
  anchor_score?: number
}

export interface SessionView {
  session_id: string
  progress: Progress
  calibration: Progress
  done: boolean
  item: ItemView | null
}

export interface ScoreAck {
  status: 'stored' | 'duplicate'
  item_id: string
  progress: Progress
  done: boolean
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail)
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>

export class StudyApi {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init)
    const body = await resp.json().catch(() => ({}))
    if (!resp.ok) {
      throw new ApiError(resp.status, (body as { detail?: string }).detail ?? resp.statusText)
    }
    return body as T
  }

  createSession(raterId: string): Promise<SessionView> {
    return this.request('/sessions', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ rater_id: raterId }),
    })
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request(`/sessions/${sessionId}`)
  }

  submitScore(sessionId: string, itemId: string, score: number): Promise<ScoreAck> {
    return this.request(`/sessions/${sessionId}/scores`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ item_id: itemId, score }),
    })
  }
}
