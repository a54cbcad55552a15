// DOM rendering. Everything on screen derives from the server-held
// SessionView, which carries no version labels or model names; stimuli are
// shown via opaque URLs at native resolution (no width/height attributes and
// no scaling styles, so perceptual judgments are not corrupted by browser
// resampling).

import { SessionView } from './api.js'

export interface ViewHandlers {
  onScore: (score: number) => void
  onContinue: () => void
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  if (className) node.className = className
  if (text !== undefined) node.textContent = text
  return node
}

function stimulusImage(url: string): HTMLImageElement {
  const img = el('img', 'stimulus')
  img.src = url
  img.alt = 'study image'
  img.draggable = false
  return img
}

export function render(
  root: HTMLElement,
  state: SessionView,
  handlers: ViewHandlers,
  errorMessage?: string,
): void {
  root.replaceChildren()

  if (state.done || !state.item) {
    const panel = el('section', 'screen screen-complete')
    panel.append(
      el('h1', undefined, 'Session complete'),
      el('p', 'summary',
        `You rated ${state.progress.answered} of ${state.progress.total} images. Thank you!`),
    )
    root.append(panel)
    return
  }

  const item = state.item
  if (item.kind === 'calibration') {
    const panel = el('section', 'screen screen-calibration')
    panel.append(
      el('h1', undefined, 'Calibration'),
      el('p', 'progress',
        `Example ${state.calibration.answered + 1} of ${state.calibration.total}`),
      el('p', 'instructions',
        'These examples anchor the rating scale. Memorize how this quality level feels.'),
      stimulusImage(item.image_url),
      el('p', 'anchor', `Reference score: ${item.anchor_score}`),
    )
    const cont = el('button', 'continue', 'Continue')
    cont.addEventListener('click', () => handlers.onContinue())
    panel.append(cont)
    root.append(panel)
    return
  }

  const panel = el('section', 'screen screen-rating')
  panel.append(
    el('h1', undefined, 'Rate this image'),
    el('p', 'progress',
      `Image ${state.progress.answered + 1} of ${state.progress.total}`),
    stimulusImage(item.image_url),
    el('p', 'instructions',
      'Score the perceptual quality from 1 (low) to 5 (high). Keys 1–5 work too.'),
  )
  const buttons = el('div', 'scores')
  for (let score = 1; score <= 5; score++) {
    const btn = el('button', 'score', String(score))
    btn.dataset.score = String(score)
    btn.addEventListener('click', () => handlers.onScore(score))
    buttons.append(btn)
  }
  panel.append(buttons)
  if (errorMessage) {
    panel.append(el('p', 'error', errorMessage))
  }
  root.append(panel)
}
