// Entry point: resolve the rater, create or resume the session, and wire
// keyboard scoring. The session id is kept in localStorage so a refresh
// resumes at the first unanswered item (the server holds all progress).

import { StudyApi } from './api.js'
import { SessionController } from './controller.js'
import { render } from './view.js'

const SESSION_KEY = 'srfeat-mos-session'
const RATER_KEY = 'srfeat-mos-rater'

function resolveRaterId(): string {
  let rater = localStorage.getItem(RATER_KEY)
  if (!rater) {
    rater = window.prompt('Rater id:')?.trim() || `rater-${Date.now()}`
    localStorage.setItem(RATER_KEY, rater)
  }
  return rater
}

export async function bootstrap(root: HTMLElement): Promise<SessionController> {
  const api = new StudyApi('')
  const controller = new SessionController(api, resolveRaterId())
  const state = await controller.start(
    localStorage.getItem(SESSION_KEY) ?? undefined)
  localStorage.setItem(SESSION_KEY, state.session_id)

  const rerender = (error?: string) =>
    render(root, controller.state, handlers, error)

  const submit = async (score: number) => {
    const result = await controller.submit(score)
    rerender(result.accepted ? undefined : result.reason)
  }

  const handlers = {
    onScore: (score: number) => void submit(score),
    onContinue: () => {
      const item = controller.state.item
      if (item?.kind === 'calibration' && item.anchor_score !== undefined) {
        void submit(item.anchor_score)
      }
    },
  }

  window.addEventListener('keydown', (event) => {
    const item = controller.state.item
    if (!item) return
    if (item.kind === 'rating' && event.key >= '1' && event.key <= '5') {
      void submit(Number(event.key))
    } else if (item.kind === 'calibration' && event.key === 'Enter') {
      handlers.onContinue()
    }
  })

  rerender()
  return controller
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  void bootstrap(document.getElementById('app')!)
}
