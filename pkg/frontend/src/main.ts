/** Browser entry point: wires the pure view models to the DOM.
 *
 * Two roles share one bundle; ?as=<principal>&role=<teacher|student> picks
 * the dashboard. All protocol state flows in through the event stream; the
 * DOM here only renders view-model snapshots and forwards clicks.
 */
import { ApiClient } from "./api.js";
import { ServerClock } from "./clock.js";
import { NudgePopup } from "./nudgePopup.js";
import { SessionViewModel, canEdit } from "./sessionView.js";
import { EventStream, type StreamSource } from "./stream.js";
import { IDLE, reduceTeacherView, type TeacherView } from "./teacherFlow.js";
import type { EventRecord, Role, UiNudgeOffer } from "./types.js";

function sseSource(baseUrl: string, principal: string): (lastSeq: number) => StreamSource {
  return (lastSeq) => {
    // EventSource cannot set an Authorization header, so stream via fetch.
    const controller = new AbortController();
    let recordHandler: (r: EventRecord) => void = () => undefined;
    let disconnectHandler: () => void = () => undefined;

    void (async () => {
      try {
        const resp = await fetch(`${baseUrl}/stream?last_seq=${lastSeq}`, {
          headers: { authorization: `Bearer ${principal}` },
          signal: controller.signal,
        });
        const reader = resp.body!.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          buffer += decoder.decode(value, { stream: true });
          let nl: number;
          while ((nl = buffer.indexOf("\n")) >= 0) {
            const line = buffer.slice(0, nl).trim();
            buffer = buffer.slice(nl + 1);
            if (line.startsWith("data: ")) {
              recordHandler(JSON.parse(line.slice(6)) as EventRecord);
            }
          }
        }
      } catch {
        /* fall through to disconnect */
      }
      if (!controller.signal.aborted) disconnectHandler();
    })();

    return {
      onRecord: (h) => (recordHandler = h),
      onDisconnect: (h) => (disconnectHandler = h),
      close: () => controller.abort(),
    };
  };
}

function el(tag: string, text = "", className = ""): HTMLElement {
  const node = document.createElement(tag);
  node.textContent = text;
  if (className) node.className = className;
  return node;
}

function mountApp(): void {
  const params = new URLSearchParams(window.location.search);
  const principal = params.get("as") ?? "";
  const role = ((params.get("role") ?? "student").toUpperCase()) as Role;
  const baseUrl = params.get("api") ?? "";

  const api = new ApiClient(baseUrl, principal);
  const clock = new ServerClock();
  const stream = new EventStream(sseSource(baseUrl, principal));
  const root = document.getElementById("app") ?? document.body;

  let teacherView: TeacherView = IDLE;
  let session: SessionViewModel | null = null;
  let popup: NudgePopup | null = null;

  function enterSession(sessionId: string): void {
    session = new SessionViewModel(sessionId, role, api);
    render();
  }

  stream.subscribe((record) => {
    clock.observe(record.ts);
    if (role === "TEACHER") {
      teacherView = reduceTeacherView(teacherView, record);
      if (teacherView.kind === "matched" && session === null) {
        enterSession(teacherView.sessionId);
      }
    }
    if (role === "STUDENT" && record.kind === "nudge_sent") {
      const offer: UiNudgeOffer = {
        nudgeId: record.payload.nudge_id as string,
        deadlineTs: record.payload.deadline as number,
        teacherLabel: "A teacher needs a hand",
      };
      popup = new NudgePopup(offer, {
        api,
        clock,
        onNavigateToSession: enterSession,
        onRender: render,
      });
    }
    if (record.kind === "nudge_cancelled" && popup?.open) {
      popup.retract();
    }
    session?.apply(record);
    render();
  });

  function renderTeacher(into: HTMLElement): void {
    switch (teacherView.kind) {
      case "idle": {
        const button = el("button", "Find a student", "find-student");
        button.onclick = () => void api.createTicket();
        into.append(button);
        break;
      }
      case "searching":
        into.append(el("p", `Looking for a student… (${teacherView.nudgedCount} asked)`, "spinner"));
        break;
      case "exhausted": {
        into.append(el("p", "No student found right now."));
        const retry = el("button", "Try again");
        retry.onclick = () => {
          teacherView = IDLE;
          render();
        };
        into.append(retry);
        break;
      }
      case "cancelled":
        into.append(el("p", "Search cancelled."));
        break;
      case "matched":
        break; // session pane takes over
    }
  }

  function renderPopup(into: HTMLElement): void {
    if (!popup) return;
    if (popup.state === "expired") {
      into.append(el("p", "Offer expired.", "popup"));
      return;
    }
    if (!popup.open) return;
    const box = el("div", "", "popup");
    box.append(el("p", popup.offer.teacherLabel));
    box.append(el("p", `${Math.ceil(popup.remainingMs / 1000)} s`, "countdown"));
    const accept = el("button", "Help now");
    accept.onclick = () => void popup!.accept();
    const decline = el("button", "Not now");
    decline.onclick = () => popup!.decline();
    box.append(accept, decline);
    into.append(box);
  }

  function renderSession(into: HTMLElement, vm: SessionViewModel): void {
    const pane = el("div", "", "session");
    // media transport is out of scope: avatars + preference toggles only
    pane.append(el("div", "● ●", "presence-stub"));
    const log = el("ul", "", "chat");
    for (const entry of vm.transcript) {
      if (entry.kind === "CHAT") log.append(el("li", `${entry.author}: ${entry.payload}`));
    }
    pane.append(log);
    const code = document.createElement("textarea");
    code.value = vm.codeText;
    code.readOnly = !canEdit(vm.role);
    code.onchange = () => void vm.sendCodeEdit(code.value);
    const run = el("button", "Run");
    run.onclick = () => void vm.sendRun();
    const end = el("button", "End session");
    end.onclick = () => void api.endSession(vm.sessionId);
    pane.append(code, run, end);
    if (vm.closedForm === "gratitude") {
      const thanks = el("button", "Say thanks");
      thanks.onclick = () => void api.recordGratitude(vm.sessionId, true);
      pane.append(thanks);
    } else if (vm.closedForm === "rating") {
      for (let score = 1; score <= 5; score++) {
        const star = el("button", "★".repeat(score));
        star.onclick = () => void api.recordRating(vm.sessionId, score);
        pane.append(star);
      }
    }
    into.append(pane);
  }

  function render(): void {
    root.replaceChildren();
    if (session) {
      renderSession(root, session);
      return;
    }
    if (role === "TEACHER") renderTeacher(root);
    renderPopup(root);
  }

  stream.open();
  render();
}

if (typeof document !== "undefined") mountApp();
