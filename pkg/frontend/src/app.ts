// Browser wiring: pad canvas, emotion bar, playback and the live session.

import { SessionClient } from './client.js';
import { TargetEmitter } from './emitter.js';
import { PadModel, vaToScreen } from './pad.js';
import { SegmentFrame } from './protocol.js';
import { SegmentScheduler } from './scheduler.js';
import { OscillatorPlayer } from './synth.js';
import { Canvas2DLike, renderEmotionBar, renderTraces } from './traces.js';

function mustGet<T extends HTMLElement>(id: string): T {
	const el = document.getElementById(id);
	if (!el) throw new Error(`missing #${id}`);
	return el as T;
}

export function startApp(): void {
	const padCanvas = mustGet<HTMLCanvasElement>('pad');
	const barCanvas = mustGet<HTMLCanvasElement>('emotion-bar');
	const statusEl = mustGet<HTMLSpanElement>('status');
	const stallEl = mustGet<HTMLSpanElement>('stall');
	const metricsEl = mustGet<HTMLPreElement>('metrics');
	const connectBtn = mustGet<HTMLButtonElement>('connect');

	const padCtx = padCanvas.getContext('2d') as unknown as Canvas2DLike;
	const barCtx = barCanvas.getContext('2d') as unknown as Canvas2DLike;
	const model = new PadModel();

	const url = `ws://${location.hostname || '127.0.0.1'}:8765/`;
	const client = new SessionClient(url, (u) => new WebSocket(u) as never);
	const emitter = new TargetEmitter((frame) => client.send(frame));

	let audio: AudioContext | null = null;
	let scheduler: SegmentScheduler | null = null;

	const redraw = () => {
		renderTraces(padCtx, model.trace, model.recognized, padCanvas.width, padCanvas.height);
		const knob = vaToScreen(model.current, padCanvas.width, padCanvas.height);
		padCtx.fillStyle = '#ffffff';
		padCtx.beginPath();
		padCtx.arc(knob.x, knob.y, 7, 0, 2 * Math.PI);
		padCtx.fill();
		renderEmotionBar(barCtx, model.recognized, barCanvas.width, barCanvas.height);
		stallEl.textContent = scheduler?.stalled ? 'STALL' : '';
	};

	client.onState = (state) => {
		statusEl.textContent = state;
		statusEl.className = state;
	};
	client.onFrame = (frame) => {
		if (frame.type === 'segment') {
			const seg = frame as SegmentFrame;
			if (seg.recognized) model.addRecognized(seg.recognized, performance.now());
			scheduler?.enqueue(seg);
		} else if (frame.type === 'metrics') {
			metricsEl.textContent = JSON.stringify(frame, null, 1);
		} else if (frame.type === 'error') {
			metricsEl.textContent = `error [${frame.code}] ${frame.msg}`;
		} else if (frame.type === 'end_of_song') {
			statusEl.textContent = 'end of song';
		}
		redraw();
	};

	connectBtn.onclick = () => {
		audio = audio ?? new AudioContext();
		scheduler = new SegmentScheduler(audio, new OscillatorPlayer(audio));
		client.connect();
		const waitOpen = setInterval(() => {
			if (client.state === 'open') {
				clearInterval(waitOpen);
				client.send({ type: 'select_song', id: 'demo' });
				emitter.dragStart(model.current.v, model.current.a);
				emitter.dragEnd();
			}
		}, 50);
	};

	const pointer = (ev: PointerEvent) => {
		const rect = padCanvas.getBoundingClientRect();
		return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
	};
	padCanvas.addEventListener('pointerdown', (ev) => {
		padCanvas.setPointerCapture(ev.pointerId);
		const va = model.pointerDown(pointer(ev), padCanvas.width, padCanvas.height, performance.now());
		emitter.dragStart(va.v, va.a);
		redraw();
	});
	padCanvas.addEventListener('pointermove', (ev) => {
		if (!model.dragging) return;
		const va = model.pointerMove(pointer(ev), padCanvas.width, padCanvas.height, performance.now());
		emitter.update(va.v, va.a);
		redraw();
	});
	padCanvas.addEventListener('pointerup', () => {
		model.pointerUp();
		emitter.dragEnd();
	});

	setInterval(() => emitter.tick(), 100);
	redraw();
}

startApp();
