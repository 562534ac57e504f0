import { ApiClient } from './api';
import { padToCanvasB64 } from './pad';
import { Session } from './session';
import { sweepStrip } from './sweep';

const TEMPLATE = `
  <div class="studio">
    <div class="row controls">
      <label>style
        <select id="style-select"></select>
      </label>
      <label><input type="checkbox" id="mashup-toggle"> mash-up</label>
      <span id="mashup-controls" hidden>
        <label>structure <select id="glyph-select"></select></label>
        <label>texture <select id="texture-select"></select></label>
      </span>
      <label class="upload">text image
        <input type="file" id="upload-input" accept="image/png,image/jpeg">
      </label>
    </div>
    <div class="row">
      <label class="slider-row">deformation
        <input type="range" id="scale-slider" min="0" max="1" step="0.01" value="0">
        <span id="scale-value">0.00</span>
      </label>
      <button id="reroll-btn">reroll texture</button>
      <span id="seed-value">seed 0</span>
    </div>
    <div id="error-banner" class="banner" hidden></div>
    <div class="row preview-row">
      <img id="preview" alt="stylized preview">
      <span id="timing-badge" class="badge"></span>
      <a id="export-link" download hidden>export PNG</a>
    </div>
    <div class="row">
      <button id="sweep-btn">sweep strip</button>
      <input type="number" id="sweep-count" min="2" value="5" style="width:3.5em">
      <div id="sweep-strip" class="strip"></div>
    </div>
  </div>
`;

export interface App {
  session: Session;
  refreshCatalog(): Promise<void>;
  runSweep(n?: number): Promise<void>;
  root: HTMLElement;
}

function option(value: string): HTMLOptionElement {
  const el = document.createElement('option');
  el.value = value;
  el.textContent = value;
  return el;
}

export function createApp(root: HTMLElement, api: ApiClient): App {
  root.innerHTML = TEMPLATE;
  const $ = <T extends HTMLElement>(sel: string) => root.querySelector(sel) as T;

  const styleSelect = $<HTMLSelectElement>('#style-select');
  const glyphSelect = $<HTMLSelectElement>('#glyph-select');
  const textureSelect = $<HTMLSelectElement>('#texture-select');
  const mashupToggle = $<HTMLInputElement>('#mashup-toggle');
  const mashupControls = $<HTMLElement>('#mashup-controls');
  const slider = $<HTMLInputElement>('#scale-slider');
  const scaleValue = $<HTMLElement>('#scale-value');
  const seedValue = $<HTMLElement>('#seed-value');
  const preview = $<HTMLImageElement>('#preview');
  const timingBadge = $<HTMLElement>('#timing-badge');
  const banner = $<HTMLElement>('#error-banner');
  const exportLink = $<HTMLAnchorElement>('#export-link');
  const strip = $<HTMLElement>('#sweep-strip');

  const session = new Session(api, {
    onPreview(update) {
      banner.hidden = true;
      preview.src = `data:image/png;base64,${update.imageB64}`;
      preview.dataset.l = update.l.toFixed(2);
      preview.dataset.requestId = String(update.requestId);
      timingBadge.textContent = `${update.timingMs.toFixed(0)} ms`;
      exportLink.href = preview.src;
      exportLink.download = session.exportFilename();
      exportLink.hidden = false;
    },
    onError(message) {
      banner.textContent = message;
      banner.hidden = false;
      if (/unknown style/.test(message)) void refreshCatalog();
    },
  });

  async function refreshCatalog(): Promise<void> {
    const entries = await api.styles();
    for (const select of [styleSelect, glyphSelect, textureSelect]) {
      select.innerHTML = '';
      for (const entry of entries) {
        if (entry.status === 'ok') select.appendChild(option(entry.name));
      }
    }
    if (!session.style && styleSelect.options.length > 0) {
      session.setStyle(styleSelect.options[0].value);
    }
  }

  styleSelect.addEventListener('change', () => session.setStyle(styleSelect.value));
  mashupToggle.addEventListener('change', () => {
    mashupControls.hidden = !mashupToggle.checked;
    if (mashupToggle.checked) {
      session.style = null;
      session.setMashup(glyphSelect.value, textureSelect.value);
    } else {
      session.setMashup(null, null);
      session.setStyle(styleSelect.value);
    }
  });
  for (const select of [glyphSelect, textureSelect]) {
    select.addEventListener('change', () => {
      if (mashupToggle.checked) session.setMashup(glyphSelect.value, textureSelect.value);
    });
  }

  slider.addEventListener('input', () => {
    const l = Number(slider.value);
    scaleValue.textContent = l.toFixed(2);
    session.setScale(l);
  });

  $<HTMLButtonElement>('#reroll-btn').addEventListener('click', () => {
    const seed = session.rerollSeed();
    seedValue.textContent = `seed ${seed}`;
  });

  $<HTMLInputElement>('#upload-input').addEventListener('change', (ev) => {
    const input = ev.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    const img = new Image();
    img.onload = () => {
      try {
        session.setImage(padToCanvasB64(img));
      } catch (err) {
        banner.textContent = err instanceof Error ? err.message : String(err);
        banner.hidden = false;
      }
      URL.revokeObjectURL(img.src);
    };
    img.src = URL.createObjectURL(file);
  });

  async function runSweep(n?: number): Promise<void> {
    const count = n ?? Number($<HTMLInputElement>('#sweep-count').value);
    if (!session.style || !session.imageB64) return;
    const frames = await sweepStrip(
      api,
      { style: session.style, seed: session.seed, imageB64: session.imageB64 },
      count,
    );
    strip.innerHTML = '';
    for (const frame of frames) {
      const cell = document.createElement('figure');
      cell.className = 'thumb';
      if (frame.imageB64) {
        const img = document.createElement('img');
        img.src = `data:image/png;base64,${frame.imageB64}`;
        img.dataset.l = frame.l.toFixed(2);
        img.addEventListener('click', () => {
          slider.value = frame.l.toFixed(2);
          slider.dispatchEvent(new Event('input', { bubbles: true }));
        });
        cell.appendChild(img);
      } else {
        const placeholder = document.createElement('div');
        placeholder.className = 'thumb-error';
        placeholder.textContent = frame.error ?? 'failed';
        cell.appendChild(placeholder);
      }
      const caption = document.createElement('figcaption');
      caption.textContent = `l=${frame.l.toFixed(2)}`;
      cell.appendChild(caption);
      strip.appendChild(cell);
    }
  }

  $<HTMLButtonElement>('#sweep-btn').addEventListener('click', () => void runSweep());

  return { session, refreshCatalog, runSweep, root };
}
