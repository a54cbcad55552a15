// Session state machine. The rendered state is always the server's view of
// the session: every submit is acknowledged and followed by a state refetch,
// so a page refresh (or a second tab) can never lose or duplicate scores.

import { ApiError, SessionView, StudyApi } from './api.js'

export interface SubmitResult {
  accepted: boolean
  reason?: string
  state: SessionView
}

export class SessionController {
  private view: SessionView | null = null
  private inFlight = false

  constructor(
    private readonly api: StudyApi,
    private readonly raterId: string,
  ) {}

  get state(): SessionView {
    if (!this.view) throw new Error('session not started')
    return this.view
  }

  /** Create a new session, or resume: by session id after a reload, or by
   * rater id (the server returns the rater's existing session). */
  async start(existingSessionId?: string): Promise<SessionView> {
    if (existingSessionId) {
      try {
        this.view = await this.api.getSession(existingSessionId)
        return this.view
      } catch (err) {
        if (!(err instanceof ApiError) || err.status !== 404) throw err
      }
    }
    this.view = await this.api.createSession(this.raterId)
    return this.view
  }

  /** Post a score for the current item and advance only once the server has
   * acknowledged persistence. Duplicate clicks while a submit is in flight
   * are ignored; invalid scores are rejected without advancing. */
  async submit(score: number): Promise<SubmitResult> {
    const state = this.state
    if (!state.item) {
      return { accepted: false, reason: 'session complete', state }
    }
    if (!Number.isInteger(score) || score < 1 || score > 5) {
      return { accepted: false, reason: 'score must be a whole number from 1 to 5', state }
    }
    if (state.item.kind === 'calibration' && score !== state.item.anchor_score) {
      return { accepted: false, reason: 'calibration items are acknowledged at their anchor score', state }
    }
    if (this.inFlight) {
      return { accepted: false, reason: 'submission in flight', state }
    }
    this.inFlight = true
    try {
      await this.api.submitScore(state.session_id, state.item.item_id, score)
      this.view = await this.api.getSession(state.session_id)
      return { accepted: true, state: this.view }
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        return { accepted: false, reason: err.message, state }
      }
      throw err
    } finally {
      this.inFlight = false
    }
  }
}
